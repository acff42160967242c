#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdlib>
#include <unistd.h>

#include "aew/estimates.hpp"
#include "aew/evolve.hpp"
#include "aew/linalg.hpp"
#include "aew/mourre.hpp"

using namespace aew;

namespace {

const MetricField& radial() {
  static const MetricField m = make_metric(MetricFamily::radial_bump, 3, 2.0, 0.3);
  return m;
}

void BM_Assemble(benchmark::State& st) {
  const Grid g = build_grid(3, static_cast<int>(st.range(0)), 8.0);
  for (auto _ : st) benchmark::DoNotOptimize(assemble_operators(radial(), g));
  st.counters["unknowns"] = static_cast<double>(g.size());
}
BENCHMARK(BM_Assemble)->Arg(8)->Arg(12)->Arg(16)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_DenseDecompose(benchmark::State& st) {
  const auto model = assemble_operators(radial(), build_grid(3, static_cast<int>(st.range(0)), 8.0));
  DecomposeOptions o;
  o.verify = false;
  for (auto _ : st) benchmark::DoNotOptimize(decompose(model, OperatorKind::P, SpectralMode::dense_eig, o));
  st.counters["unknowns"] = static_cast<double>(model.grid.size());
}
BENCHMARK(BM_DenseDecompose)->Arg(6)->Arg(8)->Arg(10)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_SqrtQuadrature(benchmark::State& st) {
  const auto model = assemble_operators(radial(), build_grid(3, 16, 8.0));
  const Vec v = bump(model.grid, 2.0);
  SqrtQuadratureOptions o;
  o.sigma_min = smallest_eigenvalue(model.P);
  o.sigma_max = largest_eigenvalue(model.P);
  for (auto _ : st) benchmark::DoNotOptimize(sqrt_quadrature(model.P, v, static_cast<int>(st.range(0)), o));
}
BENCHMARK(BM_SqrtQuadrature)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_PropagateExact(benchmark::State& st) {
  const auto model = assemble_operators(radial(), build_grid(3, 12, 8.0));
  const auto s = decompose(model, OperatorKind::P, SpectralMode::dense_eig);
  const auto data = standard_data(model.grid, 2.0);
  for (auto _ : st)
    benchmark::DoNotOptimize(propagate_trajectory(s, data[2].u0, data[2].u1, 1.0 / 64, st.range(0)));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_PropagateExact)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Leapfrog(benchmark::State& st) {
  const auto model = assemble_operators(radial(), build_grid(3, 24, 8.0));
  const double smax = largest_eigenvalue(model.P);
  const auto data = standard_data(model.grid, 2.0);
  const WaveState s0{data[0].u0, data[0].u1, 0.0, {}};
  const double dt = 0.5 / std::sqrt(smax);
  for (auto _ : st) benchmark::DoNotOptimize(propagate_leapfrog(model.P, s0, dt, st.range(0), nullptr, smax));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_Leapfrog)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_MourreCheck(benchmark::State& st) {
  const auto model = assemble_operators(radial(), build_grid(3, 10, 12.0));
  const auto s = decompose(model, OperatorKind::P, SpectralMode::dense_eig);
  const DyadicPartition part(6);
  const auto I = part.interval_above(0.5);
  for (auto _ : st) {
    const auto c = conjugate(Regime::low, s, model, static_cast<double>(st.range(0)), part);
    benchmark::DoNotOptimize(mourre_check(c, s, I, 0.5));
  }
}
BENCHMARK(BM_MourreCheck)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  // OpenBLAS reads its core type at load time; see the README
  if (!std::getenv("OPENBLAS_CORETYPE") && !std::getenv("AEW_NO_REEXEC")) {
    setenv("OPENBLAS_CORETYPE", "Haswell", 1);
    setenv("AEW_NO_REEXEC", "1", 1);
    execv("/proc/self/exe", argv);
  }
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
