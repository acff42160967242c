#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "aew/discretize.hpp"
#include "aew/linalg.hpp"
#include "aew/report.hpp"

using namespace aew;

namespace {

DiscreteModel flat_model(int d, int N, double L) {
  static const MetricField flat1 = make_metric(MetricFamily::flat, 1, 2.0, 0.0);
  static const MetricField flat2 = make_metric(MetricFamily::flat, 2, 2.0, 0.0);
  static const MetricField flat3 = make_metric(MetricFamily::flat, 3, 2.0, 0.0);
  const MetricField& m = d == 1 ? flat1 : d == 2 ? flat2 : flat3;
  return assemble_operators(m, build_grid(d, N, L));
}

Vec compact_bump(const Grid& g, double R) {
  Vec v(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double q = std::min(g.x(i).squaredNorm() / (R * R), 1.0);
    v[i] = std::pow(1.0 - q, 4);
  }
  return v;
}

}  // namespace

TEST(Grid, UnitSpacing) {
  const Grid g = build_grid(1, 9, 4.0);
  EXPECT_DOUBLE_EQ(g.spacing(), 1.0);
  for (int i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(g.coordinate(i), -4.0 + i);
}

TEST(Grid, ThreeDimensionalCount) {
  const Grid g = build_grid(3, 16, 8.0);
  EXPECT_EQ(g.size(), 4096);
  EXPECT_DOUBLE_EQ(g.spacing(), 16.0 / 15.0);
  EXPECT_NEAR(g.coordinate(0), -g.coordinate(15), 1e-14);
}

TEST(Grid, RejectsDimensionFour) { EXPECT_THROW(build_grid(4, 8, 4.0), Error); }

TEST(Grid, IndexRoundTrip) {
  const Grid g = build_grid(3, 5, 2.0);
  for (Eigen::Index k = 0; k < g.size(); ++k) EXPECT_EQ(g.index(g.multi_index(k)), k);
}

TEST(Assembly, FlatOneDimensionalStencil) {
  const auto m = flat_model(1, 5, 2.0);
  const double h = m.grid.spacing();
  Mat expect = Mat::Zero(5, 5);
  for (int i = 0; i < 5; ++i) {
    expect(i, i) = 2.0 / (h * h);
    if (i > 0) expect(i, i - 1) = -1.0 / (h * h);
    if (i < 4) expect(i, i + 1) = -1.0 / (h * h);
  }
  EXPECT_LT((Mat(m.P) - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((Mat(m.P0) - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Assembly, FlatOperatorsCoincide) {
  const auto m = flat_model(2, 9, 3.0);
  EXPECT_EQ(SpMat(m.P - m.P0).norm(), 0.0);
  EXPECT_EQ(SpMat(m.Ptilde - m.P0).norm(), 0.0);
  EXPECT_EQ(m.P.nonZeros(), m.P0.nonZeros());
}

TEST(Assembly, RadialBumpSymmetricPositive) {
  const auto metric = make_metric(MetricFamily::radial_bump, 3, 2.0, 0.3);
  const auto m = assemble_operators(metric, build_grid(3, 12, 6.0));
  for (const SpMat* op : {&m.P, &m.P0, &m.Ptilde}) {
    EXPECT_LT(symmetry_residual(*op), 1e-13);
    Mat dense(*op);
    const Vec ev = symmetric_eigen(dense);
    EXPECT_GE(ev[0], -1e-10 * ev[ev.size() - 1]);
  }
}

TEST(Assembly, CosineModeIsDiscreteEigenvector) {
  // cos(pi x / 2L') with L' = L + h vanishes on the ghost layer
  const double L = 4.0;
  const auto m = flat_model(2, 17, L);
  const double h = m.grid.spacing();
  const double k = std::numbers::pi / (2.0 * (L + h));
  Vec v(m.grid.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Point x = m.grid.x(i);
    v[i] = std::cos(k * x[0]) * std::cos(k * x[1]);
  }
  const double s = std::sin(0.5 * k * h);
  EXPECT_LT((m.P * v - 8.0 * s * s / (h * h) * v).norm(), 1e-12 * v.norm() / (h * h));
}

TEST(Assembly, SecondOrderConsistencyOnGaussian) {
  std::vector<double> hs, errs;
  for (int N : {17, 33, 65}) {
    const auto m = flat_model(2, N, 6.0);
    Vec v(m.grid.size()), lap(m.grid.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double r2 = m.grid.x(i).squaredNorm();
      v[i] = std::exp(-0.5 * r2);
      lap[i] = (2.0 - r2) * v[i];
    }
    hs.push_back(m.grid.spacing());
    errs.push_back((m.P * v - lap).norm() / lap.norm());
  }
  const auto fit = fit_power_law(hs, errs);
  EXPECT_GE(fit.slope, 1.8);
  EXPECT_LE(fit.slope, 2.2);
}

TEST(Dilation, AntisymmetricWithClosedFormEntries) {
  const auto m = flat_model(1, 5, 2.0);
  const Mat S(m.A0);
  EXPECT_EQ((S + S.transpose()).cwiseAbs().maxCoeff(), 0.0);
  const double h = m.grid.spacing();
  for (int i = 0; i + 1 < 5; ++i)
    EXPECT_NEAR(S(i, i + 1), (m.grid.coordinate(i) + m.grid.coordinate(i + 1)) / (4.0 * h), 1e-15);
}

TEST(Dilation, ExpectationIsReal) {
  const auto m = flat_model(1, 64, 8.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Vec u(m.grid.size());
  for (auto& x : u) x = n(rng);
  // <A0 u, u> = -i u^T S u, whose imaginary part is the real quadratic form of S
  EXPECT_LT(std::abs(u.dot(m.A0 * u)), 1e-14 * u.squaredNorm() * Mat(m.A0).cwiseAbs().maxCoeff());
}

TEST(Dilation, CommutatorIsTwiceLaplacian) {
  std::vector<double> res;
  for (int N : {64, 128}) {
    const auto m = flat_model(1, N, 8.0);
    const Vec v = compact_bump(m.grid, 4.0);
    const Vec lhs = m.P0 * (m.A0 * v) - m.A0 * (m.P0 * v);
    const Vec rhs = 2.0 * (m.P0 * v);
    res.push_back((lhs - rhs).norm() / rhs.norm());
  }
  EXPECT_LT(res[0], 0.05);
  EXPECT_LT(res[1], res[0]);
}

TEST(VectorFields, RotationsCommuteWithFlatLaplacian) {
  std::vector<double> res;
  for (int N : {33, 65}) {
    const auto m = flat_model(2, N, 6.0);
    const Vec v = compact_bump(m.grid, 3.0);
    const SpMat& R = m.rot[0];
    const Vec c = R * (m.P0 * v) - m.P0 * (R * v);
    res.push_back(c.norm() / (m.P0 * v).norm());
  }
  // the five-point Laplacian commutes with the discrete rotation field up to rounding
  for (double r : res) EXPECT_LT(r, 1e-12);
}

TEST(VectorFields, FlatDtildeIsCenteredDifference) {
  const auto m = flat_model(2, 9, 3.0);
  for (int a = 0; a < 2; ++a) EXPECT_EQ(SpMat(m.dtilde_node[a] - m.Dc[a]).norm(), 0.0);
}

TEST(Triplets, RoundTrip) {
  const auto metric = make_metric(MetricFamily::anisotropic_bump, 2, 2.0, 0.3);
  const auto m = assemble_operators(metric, build_grid(2, 7, 3.0));
  std::stringstream ss;
  write_triplets(ss, m.P);
  const SpMat back = read_triplets(ss);
  EXPECT_EQ(SpMat(back - m.P).norm(), 0.0);
}

TEST(CausalWindow, FlatIsDistanceToWall) {
  const auto m = flat_model(3, 8, 10.0);
  EXPECT_NEAR(causal_window(m, 2.0), 8.0, 1e-12);
}
