#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aew/discretize.hpp"
#include "aew/spectral.hpp"

using namespace aew;

namespace {

struct Fixture {
  MetricField metric;
  DiscreteModel model;
  SpectralData s;

  Fixture(MetricFamily fam, int d, int N, double L, double a = 0.3)
      : metric(make_metric(fam, d, 2.0, fam == MetricFamily::flat ? 0.0 : a)),
        model(assemble_operators(metric, build_grid(d, N, L))),
        s(decompose(model, OperatorKind::P, SpectralMode::dense_eig)) {}
};

Vec smooth_vector(const Grid& g) {
  Vec v(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) v[i] = std::exp(-g.x(i).squaredNorm()) * (1.0 + 0.3 * g.x(i)[0]);
  return v;
}

std::vector<double> stencil_eigenvalues(int N, double h) {
  std::vector<double> out;
  for (int k = 1; k <= N; ++k) {
    const double s = std::sin(k * std::numbers::pi / (2.0 * (N + 1)));
    out.push_back(4.0 / (h * h) * s * s);
  }
  return out;
}

}  // namespace

TEST(Decompose, OneDimensionalClosedForm) {
  Fixture f(MetricFamily::flat, 1, 5, 2.0);
  const auto expect = stencil_eigenvalues(5, f.model.grid.spacing());
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(f.s.eigenvalues[k], expect[k], 1e-12);
}

TEST(Decompose, TensorProductEigenvalues) {
  Fixture f(MetricFamily::flat, 3, 12, 5.0);
  const auto one = stencil_eigenvalues(12, f.model.grid.spacing());
  std::vector<double> sums;
  for (double a : one)
    for (double b : one)
      for (double c : one) sums.push_back(a + b + c);
  std::sort(sums.begin(), sums.end());
  ASSERT_EQ(static_cast<Eigen::Index>(sums.size()), f.s.eigenvalues.size());
  for (std::size_t k = 0; k < sums.size(); ++k)
    EXPECT_NEAR(f.s.eigenvalues[static_cast<Eigen::Index>(k)], sums[k], 1e-10 * sums.back());
}

TEST(Decompose, ResidualsOnAllFamilies) {
  for (auto fam : {MetricFamily::flat, MetricFamily::radial_bump, MetricFamily::anisotropic_bump}) {
    Fixture f(fam, 3, 9, 4.0);
    EXPECT_LT(f.s.reconstruction_residual, 1e-10) << to_string(fam);
    EXPECT_LT(f.s.orthogonality_residual, 1e-11) << to_string(fam);
    EXPECT_GE(f.s.eigenvalues.minCoeff(), 0.0);
  }
}

TEST(Decompose, DenseCapRefused) {
  const auto metric = make_metric(MetricFamily::flat, 3, 2.0, 0.0);
  const auto model = assemble_operators(metric, build_grid(3, 12, 4.0));
  DecomposeOptions o;
  o.dense_cap = 1000;
  EXPECT_THROW(decompose(model, OperatorKind::P, SpectralMode::dense_eig, o), Error);
}

TEST(FunctionalCalculus, IdentityConstantAndSemigroup) {
  Fixture f(MetricFamily::radial_bump, 2, 16, 4.0);
  const Vec v = smooth_vector(f.model.grid);
  const Vec Pv = f.model.P * v;
  EXPECT_LT((apply_function(f.s, [](double x) { return x; }, v) - Pv).norm(), 1e-10 * Pv.norm());
  EXPECT_LT((apply_function(f.s, [](double) { return 1.0; }, v) - v).norm(), 1e-12 * v.norm());
  const auto sq = [](double x) { return std::sqrt(x); };
  const Vec twice = apply_function(f.s, sq, apply_function(f.s, sq, v));
  EXPECT_LT((twice - Pv).norm(), 1e-9 * Pv.norm());
}

TEST(FunctionalCalculus, HalfWaveIsUnitary) {
  Fixture f(MetricFamily::anisotropic_bump, 2, 12, 4.0);
  const CVec v = smooth_vector(f.model.grid).cast<cplx>();
  const CVec w = apply_complex_function(
      f.s, [](double x) { return std::exp(cplx(0.0, -2.7 * std::sqrt(x))); }, v);
  EXPECT_NEAR(w.norm(), v.norm(), 1e-10 * v.norm());
}

TEST(SqrtQuadrature, MatchesDenseRoot) {
  Fixture f(MetricFamily::flat, 1, 64, 8.0);
  const Vec v = smooth_vector(f.model.grid);
  const Vec exact = apply_function(f.s, [](double x) { return std::sqrt(x); }, v);
  const auto q = sqrt_quadrature(f.model.P, v, 40);
  EXPECT_LT((q.value - exact).norm() / exact.norm(), 1e-6);
}

TEST(SqrtQuadrature, EigenvectorMapsToRoot) {
  Fixture f(MetricFamily::radial_bump, 1, 48, 6.0);
  const Vec phi = f.s.eigenvectors.col(7);
  const auto q = sqrt_quadrature(f.model.P, phi, 40);
  EXPECT_LT((q.value - std::sqrt(f.s.eigenvalues[7]) * phi).norm(), 1e-6 * std::sqrt(f.s.eigenvalues[7]));
}

TEST(SqrtQuadrature, ConvergesAsNodesDouble) {
  Fixture f(MetricFamily::flat, 1, 64, 8.0);
  const Vec v = smooth_vector(f.model.grid);
  const Vec exact = apply_function(f.s, [](double x) { return std::sqrt(x); }, v);
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {10, 20, 40}) {
    const double err = (sqrt_quadrature(f.model.P, v, n).value - exact).norm() / exact.norm();
    EXPECT_LE(err, prev + 1e-13);
    prev = err;
  }
}

TEST(Dyadic, PartitionOfUnityOnCoverage) {
  const auto p = build_dyadic(6);
  const auto cov = p.coverage();
  for (int k = 0; k <= 2000; ++k) {
    const double x = cov.lo * std::pow(cov.hi / cov.lo, k / 2000.0);
    EXPECT_NEAR(p.partition_sum(x), 1.0, 1e-12) << x;
  }
  EXPECT_NEAR(p.partition_sum(0.7), 1.0, 1e-15);
}

TEST(Dyadic, PhiNonnegativeAndTildeIsOneOnSupport) {
  const auto p = build_dyadic(4);
  for (int k = 0; k < 10000; ++k) {
    const double x = 0.3 + 2.0 * k / 10000.0;
    EXPECT_GE(p.phi(x), 0.0);
    EXPECT_NEAR(p.phi_tilde(x) * p.phi(x), p.phi(x), 1e-14);
  }
  EXPECT_GT(p.phi(1.0), 0.0);
  const auto I = p.interval_above(0.5);
  EXPECT_LT(I.lo, 1.0);
  EXPECT_GT(I.hi, 1.0);
  EXPECT_GT(p.phi(0.5 * (I.lo + I.hi)), 0.5);
}

TEST(Projector, AlgebraAndRank) {
  Fixture f(MetricFamily::radial_bump, 1, 40, 6.0);
  const Mat all = spectral_projector(f.s, {0.0, std::numeric_limits<double>::infinity()});
  EXPECT_LT((all - Mat::Identity(40, 40)).cwiseAbs().maxCoeff(), 1e-12);
  const double s7 = f.s.eigenvalues[7];
  const Mat one = spectral_projector(f.s, {s7, s7});
  EXPECT_NEAR(one.trace(), 1.0, 1e-12);
  const Interval J1{0.5, 3.0}, J2{1.0, 6.0};
  const Mat P1 = spectral_projector(f.s, J1), P2 = spectral_projector(f.s, J2);
  const Mat P12 = spectral_projector(f.s, {1.0, 3.0});
  EXPECT_LT((P1 * P2 - P12).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((P1 * P1 - P1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((P1 - P1.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(P1.trace(), static_cast<double>(spectral_indices(f.s, J1).size()), 1e-10);
  EXPECT_EQ(spectral_projector(f.s, {1e6, 2e6}).norm(), 0.0);
}

TEST(Resolvent, DenseAndIterativeAgree) {
  Fixture f(MetricFamily::radial_bump, 2, 10, 3.0);
  const auto it = decompose(f.model, OperatorKind::P, SpectralMode::iterative);
  const CVec v = smooth_vector(f.model.grid).cast<cplx>();
  const cplx z(1.3, 0.2);
  const CVec a = resolvent_apply(f.s, z, v);
  const CVec b = resolvent_apply(it, z, v);
  EXPECT_LT((a - b).norm(), 1e-10 * a.norm());
  const CVec back = f.model.P.cast<cplx>() * a - z * a;
  EXPECT_LT((back - v).norm(), 1e-10 * v.norm());
}
