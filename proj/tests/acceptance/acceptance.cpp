#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "aew/config.hpp"
#include "aew/estimates.hpp"
#include "aew/evolve.hpp"
#include "aew/runner.hpp"

namespace fs = std::filesystem;
using namespace aew;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

ExperimentConfig config_from(const std::string& text, const std::string& dir) {
  std::istringstream is(text);
  auto c = parse_config(is);
  c.directory = dir;
  return c;
}

const EstimateReport& find_report(const RunResult& r, const std::string& name) {
  for (const auto& rep : r.reports)
    if (rep.experiment == name) return rep;
  throw Error("report '" + name + "' missing");
}

std::string out_dir(int criterion, const std::string& tag) {
  return (fs::path("acceptance_out") / ("c" + std::to_string(criterion)) / tag).string();
}

// ---------------------------------------------------------------- C1

double stencil_mismatch(const DiscreteModel& m) {
  const Grid& g = m.grid;
  const int d = g.dimension();
  const double h2 = g.spacing() * g.spacing();
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    t.emplace_back(k, k, 2.0 * d / h2);
    const auto a = g.multi_index(k);
    for (int ax = 0; ax < d; ++ax)
      for (int step : {-1, 1}) {
        auto b = a;
        b[ax] += step;
        if (b[ax] < 0 || b[ax] >= g.points_per_axis()) continue;
        t.emplace_back(k, g.index(b), -1.0 / h2);
      }
  }
  SpMat expect(g.size(), g.size());
  expect.setFromTriplets(t.begin(), t.end());
  return Mat(m.P - expect).cwiseAbs().maxCoeff() / (2.0 * d / h2);
}

Outcome c1() {
  const double L = 4.0;
  std::ostringstream det;
  bool ok = true;
  for (int d = 1; d <= 3; ++d) {
    const auto metric = make_metric(MetricFamily::flat, d, 2.0, 0.0);
    const double mismatch = stencil_mismatch(assemble_operators(metric, build_grid(d, 7, L)));
    const std::vector<int> Ns = d < 3 ? std::vector<int>{17, 33, 65} : std::vector<int>{9, 17, 33};
    std::vector<double> hs, errs;
    for (int N : Ns) {
      // gaussian e^{-|x|^2/2}: -Lap f = (d - |x|^2) f, boundary trace below 1e-7
      const auto m = assemble_operators(metric, build_grid(d, N, 6.0));
      Vec v(m.grid.size()), lap(m.grid.size());
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double r2 = m.grid.x(i).squaredNorm();
        v[i] = std::exp(-0.5 * r2);
        lap[i] = (d - r2) * v[i];
      }
      hs.push_back(m.grid.spacing());
      errs.push_back((m.P * v - lap).norm() / lap.norm());
    }
    const auto fit = fit_power_law(hs, errs);
    const bool dok = mismatch < 1e-12 && fit.slope >= 1.8 && fit.slope <= 2.2;
    ok = ok && dok;
    det << "d=" << d << " stencil " << num(mismatch) << " slope " << num(fit.slope) << "; ";
  }
  double worst_sym = 0.0;
  for (auto fam : {MetricFamily::flat, MetricFamily::radial_bump, MetricFamily::anisotropic_bump}) {
    const auto metric = make_metric(fam, 3, 2.0, fam == MetricFamily::flat ? 0.0 : 0.3);
    const auto m = assemble_operators(metric, build_grid(3, 12, 8.0));
    for (const SpMat* op : {&m.P, &m.P0, &m.Ptilde}) worst_sym = std::max(worst_sym, symmetry_residual(*op));
  }
  ok = ok && worst_sym < 1e-13;
  det << "symmetry " << num(worst_sym);
  return {ok, det.str()};
}

// ---------------------------------------------------------------- C2

Outcome c2() {
  std::ostringstream det;
  bool ok = true;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  for (auto fam : {MetricFamily::flat, MetricFamily::radial_bump, MetricFamily::anisotropic_bump}) {
    const auto metric = make_metric(fam, 3, 2.0, fam == MetricFamily::flat ? 0.0 : 0.3);
    const auto model = assemble_operators(metric, build_grid(3, 12, 8.0));
    const auto s = decompose(model, OperatorKind::P, SpectralMode::dense_eig);
    Vec noise(model.grid.size());
    for (auto& x : noise) x = normal(rng);
    double worst = 0.0;
    for (const Vec& v : {bump(model.grid, 2.0), noise}) {
      const Vec exact = apply_function(s, [](double x) { return std::sqrt(x); }, v);
      const auto q = sqrt_quadrature(model.P, v, 40);
      worst = std::max(worst, (q.value - exact).norm() / exact.norm());
    }
    ok = ok && worst < 1e-6;
    det << to_string(fam) << " " << num(worst) << "; ";
  }
  return {ok, det.str() + "limit 1e-06"};
}

// ---------------------------------------------------------------- C3

Outcome c3() {
  std::ostringstream det;
  bool ok = true;
  const double R = 2.0;
  for (auto fam : {MetricFamily::flat, MetricFamily::radial_bump, MetricFamily::anisotropic_bump}) {
    const auto metric = make_metric(fam, 3, 2.0, fam == MetricFamily::flat ? 0.0 : 0.3);
    const auto model = assemble_operators(metric, build_grid(3, 12, 8.0));
    const auto s = decompose(model, OperatorKind::P, SpectralMode::dense_eig);
    const double T = causal_window(model, R);
    const auto data = standard_data(model.grid, R);
    double worst = 0.0;
    for (const auto& datum : data) {
      WaveState st{datum.u0, datum.u1, 0.0, {}};
      const double e0 = energy(s, st);
      const int steps = std::max(1, static_cast<int>(std::ceil(T / 0.25)));
      for (int j = 0; j < steps; ++j) {
        st = propagate_exact(s, st, T / steps);
        worst = std::max(worst, std::abs(energy(s, st) - e0) / e0);
      }
    }
    ok = ok && worst <= 1e-10;
    det << to_string(fam) << " T=" << num(T) << " drift " << num(worst) << "; ";
  }
  return {ok, det.str() + "limit 1e-10"};
}

// ---------------------------------------------------------------- C4, C5

std::string mourre_ini(const std::string& family, double lap_lambda) {
  std::ostringstream os;
  os << "[run]\nexperiment = mourre-check\nseed = 1\n[metric]\nfamily = " << family
     << "\nd = 3\nrho = 2\namplitude = " << (family == "flat" ? "0" : "0.3")
     << "\n[grid]\nN = 12\nL = 16\n[experiment]\nlambdas = 4 8 16 32 64\ndelta = 0.5\nslack = 0.2\n"
     << "lap_lambda = " << lap_lambda << "\nlap_mu = 1\nlap_samples = 20\n";
  return os.str();
}

Outcome c4() {
  std::ostringstream det;
  bool ok = true;
  for (std::string fam : {"flat", "radial_bump"}) {
    const auto r = run_experiment(config_from(mourre_ini(fam, 0), out_dir(4, fam)));
    const auto& rep = find_report(r, "mourre-check");
    bool seen = false, beyond = true;
    double worst_gap = std::numeric_limits<double>::infinity();
    for (const auto& row : rep.rows) {
      const bool pass = row.verdict == "pass";
      if (seen && !pass) beyond = false;
      seen = seen || pass;
      if (row.predicted > 0.0) worst_gap = std::min(worst_gap, row.measured / row.predicted);
    }
    const double slope = rep.fit ? rep.fit->slope : std::numeric_limits<double>::quiet_NaN();
    const bool fok = seen && beyond && rep.fit && slope < 0.0;
    ok = ok && fok;
    det << fam << ": " << (seen ? "passing scales found" : "no scale passes")
        << ", min commutator/bound " << num(worst_gap) << " (need 0.8), remainder slope "
        << num(slope) << "; ";
  }
  return {ok, det.str()};
}

Outcome c5() {
  std::ostringstream det;
  // look for a Mourre-passing (lambda, window) pair on either family
  double lap_lambda = 0.0;
  std::string family = "flat";
  for (std::string fam : {"flat", "radial_bump"}) {
    const auto r = run_experiment(config_from(mourre_ini(fam, 0), out_dir(5, fam + "_scan")));
    for (const auto& row : find_report(r, "mourre-check").rows)
      if (row.verdict == "pass" && lap_lambda == 0.0) {
        lap_lambda = std::stod(row.params.front().second);
        family = fam;
      }
  }
  const bool window_found = lap_lambda > 0.0;
  if (!window_found) lap_lambda = 16.0;
  const auto r = run_experiment(config_from(mourre_ini(family, lap_lambda), out_dir(5, family)));
  const auto& lap = find_report(r, "limiting-absorption");
  const auto& kato = find_report(r, "kato-smoothness");
  const double last_ratio = lap.rows.back().residual;
  double worst_kato = 0.0;
  for (const auto& row : kato.rows) worst_kato = std::max(worst_kato, row.residual);
  const bool stabilized = last_ratio < 2.0;
  const bool kato_ok = worst_kato <= 1.0 && kato.rows.size() >= 20;
  det << family << " lambda=" << num(lap_lambda)
      << (window_found ? " on a Mourre-passing window" : " (no Mourre-passing window exists)")
      << ", last-two-eta ratio " << num(last_ratio) << ", worst Kato ratio " << num(worst_kato);
  return {window_found && stabilized && kato_ok, det.str()};
}

// ---------------------------------------------------------------- C6, C7

std::string kss_ini(const std::string& experiment, const std::string& family, const std::string& extra,
                    int N = 16, const std::string& T_list = "1 1.5 2 3 4 6") {
  std::ostringstream os;
  os << "[run]\nexperiment = " << experiment << "\n[metric]\nfamily = " << family
     << "\nd = 3\nrho = 2\namplitude = " << (family == "flat" ? "0" : "0.3") << "\n[grid]\nN = " << N
     << "\nL = 10\n[experiment]\nT_list = " << T_list << "\nR_data = 2\n" << extra;
  return os.str();
}

Outcome c6() {
  std::ostringstream det;
  bool ok = true;
  for (std::string fam : {"flat", "radial_bump"})
    for (double mu : {1.0, 0.25}) {
      const std::string tag = fam + (mu == 1.0 ? "_mu1" : "_mu025");
      const auto r = run_experiment(
          config_from(kss_ini("kss-scan", fam, "mu = " + num(mu) + "\n"), out_dir(6, tag)));
      const auto& rep = find_report(r, "kss-scan");
      ok = ok && rep.verdict == Verdict::pass;
      det << tag << " " << to_string(rep.verdict);
      if (mu < 0.5 && rep.fit)
        det << " (exponent " << num(rep.fit->slope) << ", R2 " << num(rep.fit->r_squared)
            << ", limit 0.65)";
      det << "; ";
    }
  return {ok, det.str()};
}

Outcome c7() {
  const auto r = run_experiment(config_from(
      kss_ini("kss-higher", "radial_bump", "mu = 1\nN_order = 1\n"), out_dir(7, "radial")));
  const auto& rep = find_report(r, "kss-higher");
  std::string detail = "radial_bump N_order=1 mu=1 " + to_string(rep.verdict);
  for (const auto& n : rep.notes) detail += "; " + n;
  return {rep.verdict == Verdict::pass, detail};
}

// ---------------------------------------------------------------- C8

Outcome c8() {
  std::ostringstream det;
  const std::string base =
      "[run]\nexperiment = resolvent-scan\n[metric]\nd = 3\nrho = 2\n[grid]\nN = 16\nL = 10\n"
      "[spectral]\nmode = iterative\n";
  const std::string lambdas = "lambdas = 1 2 4 8 16 32 64 128 256 512 1024\n";
  const auto flat = run_experiment(config_from(
      base + "[experiment]\noperator = P0\nbeta = 0\ngamma = 0.75\n" + lambdas, out_dir(8, "flat")));
  std::string pert_ini = base + "[experiment]\noperator = P\nbeta = 0\ngamma = 0.5\n" + lambdas;
  pert_ini.replace(pert_ini.find("d = 3"), 5, "family = radial_bump\namplitude = 0.3\nd = 3");
  const auto pert = run_experiment(config_from(pert_ini, out_dir(8, "perturbed")));
  const auto& f = find_report(flat, "resolvent-scan");
  const auto& p = find_report(pert, "resolvent-scan");
  const bool flat_ok = f.fit && f.fit->slope <= -0.55 && f.fit->r_squared >= 0.9;
  const bool pert_ok = p.fit && p.fit->slope <= -0.3;
  det << "flat slope " << num(f.fit ? f.fit->slope : NAN) << " R2 "
      << num(f.fit ? f.fit->r_squared : NAN) << "; perturbed slope "
      << num(p.fit ? p.fit->slope : NAN) << "; ";

  bool eq_ok = true;
  for (auto fam : {MetricFamily::flat, MetricFamily::radial_bump}) {
    const auto metric = make_metric(fam, 3, 2.0, fam == MetricFamily::flat ? 0.0 : 0.3);
    const auto model = assemble_operators(metric, build_grid(3, 12, 8.0));
    const auto s = decompose(model, OperatorKind::P, SpectralMode::dense_eig);
    const auto c = equivalence_constants(model, s);
    if (fam == MetricFamily::flat) {
      const double dev = std::max(std::abs(c.b53_min - 1.0), std::abs(c.b53_max - 1.0));
      eq_ok = eq_ok && dev <= 1e-10;
      det << "flat b53 deviation " << num(dev) << "; ";
    } else {
      const double ratio = c.b53_max / c.b53_min;
      eq_ok = eq_ok && std::isfinite(ratio) && c.b53_min > 0.0 && ratio < 10.0;
      det << "radial b53 in [" << num(c.b53_min) << ", " << num(c.b53_max) << "]";
    }
  }
  return {flat_ok && pert_ok && eq_ok, det.str()};
}

// ---------------------------------------------------------------- C9

Outcome c9() {
  const std::string ini =
      "[run]\nexperiment = lifespan-sweep\n[metric]\nfamily = flat\nd = 3\n[grid]\nN = 16\nL = 10\n"
      "[experiment]\ndeltas = 0.5 0.25 0.125 0.0625\nT_max = 8\nR_data = 2\n"
      "contraction_delta = 0.1\ncontraction_T = 4\n";
  const auto r = run_experiment(config_from(ini, out_dir(9, "flat")));
  const auto& con = find_report(r, "contraction");
  const auto& sweep = find_report(r, "lifespan-sweep");
  std::vector<double> inv_delta, T_obs;
  std::vector<double> all_T;
  int truncated = 0;
  for (const auto& row : sweep.rows) {
    if (row.params.empty() || row.params.front().first != "delta") continue;
    const double delta = std::stod(row.params.front().second);
    all_T.push_back(row.measured);
    if (row.verdict == "truncated") {
      ++truncated;
      continue;
    }
    inv_delta.push_back(1.0 / delta);
    T_obs.push_back(row.measured);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < all_T.size(); ++i) monotone = monotone && all_T[i] >= all_T[i - 1];
  std::ostringstream det;
  det << "contraction " << to_string(con.verdict) << "; " << truncated << " of " << all_T.size()
      << " records truncated at T_max";
  bool fit_ok = false;
  if (T_obs.size() >= 2) {
    const auto fit = fit_power_law(inv_delta, T_obs);
    fit_ok = fit.slope >= 1.0 && fit.r_squared >= 0.85;
    det << "; slope " << num(fit.slope) << " R2 " << num(fit.r_squared);
  } else {
    det << "; fewer than two untruncated records, slope undefined";
  }
  det << "; T_obs " << (monotone ? "monotone" : "not monotone");
  return {con.verdict == Verdict::pass && monotone && fit_ok, det.str()};
}

// ---------------------------------------------------------------- C10

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

Outcome c10() {
  const std::map<std::string, std::string> configs = {
      {"kss", kss_ini("kss-scan", "radial_bump", "mu = 0.5\n", 10, "1 2 3")},
      {"mourre", mourre_ini("radial_bump", 16)},
      {"selftest", "[run]\nexperiment = selftest\n[metric]\nfamily = anisotropic_bump\nd = 2\n"
                   "amplitude = 0.3\n[grid]\nN = 16\nL = 6\n"},
  };
  std::ostringstream det;
  bool ok = true;
  for (const auto& [tag, ini] : configs) {
    const auto a = run_experiment(config_from(ini, out_dir(10, tag + "_a")));
    const auto b = run_experiment(config_from(ini, out_dir(10, tag + "_b")));
    int compared = 0;
    bool same = a.files == b.files;
    for (const auto& f : a.files) {
      if (fs::path(f).extension() != ".csv") continue;
      ++compared;
      same = same && slurp(fs::path(out_dir(10, tag + "_a")) / f) ==
                         slurp(fs::path(out_dir(10, tag + "_b")) / f);
    }
    ok = ok && same && compared > 0;
    det << tag << " " << compared << " csv " << (same ? "identical" : "DIFFER") << "; ";
  }
  return {ok, det.str()};
}

struct Criterion {
  int id;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  const std::vector<Criterion> all = {
      {1, 60, c1},    {2, 300, c2},   {3, 120, c3},  {4, 600, c4},   {5, 600, c5},
      {6, 1200, c6},  {7, 1200, c7},  {8, 600, c8},  {9, 1800, c9},  {10, 1800, c10},
  };
  int failures = 0;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + num(c.budget_seconds) + " s budget";
    }
    std::cout << "C" << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << " ["
              << num(secs) << " s]" << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
