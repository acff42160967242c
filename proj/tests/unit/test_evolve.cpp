#include <gtest/gtest.h>

#include <cmath>

#include "aew/estimates.hpp"
#include "aew/evolve.hpp"

using namespace aew;

namespace {

struct Rig {
  MetricField metric;
  DiscreteModel model;
  SpectralData s;

  Rig(MetricFamily fam, int d, int N, double L)
      : metric(make_metric(fam, d, 2.0, fam == MetricFamily::flat ? 0.0 : 0.3)),
        model(assemble_operators(metric, build_grid(d, N, L))),
        s(decompose(model, OperatorKind::P, SpectralMode::dense_eig)) {}
};

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST(Exact, EigenmodeOscillates) {
  Rig st(MetricFamily::radial_bump, 2, 12, 5.0);
  const Eigen::Index k = 9;
  const double w = std::sqrt(st.s.eigenvalues[k]);
  WaveState s0{st.s.eigenvectors.col(k), Vec::Zero(st.s.size()), 0.0, {}};
  const auto s1 = propagate_exact(st.s, s0, 3.7);
  EXPECT_LT(rel(s1.u, std::cos(3.7 * w) * s0.u), 1e-12);
  EXPECT_LT((s1.v + w * std::sin(3.7 * w) * s0.u).norm(), 1e-12 * w);
  EXPECT_DOUBLE_EQ(s1.t, 3.7);
}

TEST(Exact, EnergyConserved) {
  for (auto fam : {MetricFamily::flat, MetricFamily::radial_bump, MetricFamily::anisotropic_bump}) {
    Rig st(fam, 3, 8, 6.0);
    WaveState s0{bump(st.model.grid, 2.0), bump(st.model.grid, 1.5, Point(0.5, 0, 0)), 0.0, {}};
    const double e0 = energy(st.s, s0);
    const auto s1 = propagate_exact(st.s, s0, 4.0);
    EXPECT_LT(std::abs(energy(st.s, s1) - e0) / e0, 1e-10) << to_string(fam);
  }
}

TEST(Exact, CausalWindowWarning) {
  Rig st(MetricFamily::flat, 1, 20, 5.0);
  WaveState s0{bump(st.model.grid, 1.0), Vec::Zero(20), 0.0, {}};
  PropagateOptions o;
  o.causal_window = 2.0;
  EXPECT_TRUE(propagate_exact(st.s, s0, 1.0, nullptr, o).warning.empty());
  EXPECT_FALSE(propagate_exact(st.s, s0, 3.0, nullptr, o).warning.empty());
  EXPECT_THROW(propagate_exact(st.s, s0, -1.0), Error);
}

TEST(Exact, ConstantSourceClosedForm) {
  Rig st(MetricFamily::radial_bump, 1, 40, 6.0);
  const Vec g = bump(st.model.grid, 2.0);
  SourceSamples src{0.1, g.replicate(1, 51)};
  WaveState s0{Vec::Zero(40), Vec::Zero(40), 0.0, {}};
  const double t = 4.37;
  const auto s1 = propagate_exact(st.s, s0, t, &src);
  const Vec expect = apply_function(
      st.s, [t](double sg) { return (1.0 - std::cos(std::sqrt(sg) * t)) / sg; }, g);
  EXPECT_LT(rel(s1.u, expect), 1e-11);
}

TEST(Exact, LinearSourceIsExact) {
  Rig st(MetricFamily::flat, 1, 40, 6.0);
  const Vec g = bump(st.model.grid, 2.0);
  Mat vals(40, 41);
  for (int j = 0; j <= 40; ++j) vals.col(j) = (0.1 * j) * g;
  SourceSamples src{0.1, vals};
  WaveState s0{Vec::Zero(40), Vec::Zero(40), 0.0, {}};
  const double t = 3.0;
  const auto s1 = propagate_exact(st.s, s0, t, &src);
  const Vec expect = apply_function(
      st.s,
      [t](double sg) {
        const double w = std::sqrt(sg);
        return (t - std::sin(w * t) / w) / sg;
      },
      g);
  EXPECT_LT(rel(s1.u, expect), 1e-11);
}

TEST(Exact, DuhamelIsLinear) {
  Rig st(MetricFamily::anisotropic_bump, 2, 10, 4.0);
  const Vec a = bump(st.model.grid, 2.0), b = bump(st.model.grid, 1.5, Point(1, 0, 0));
  Mat ga(a.size(), 21), gb(a.size(), 21);
  for (int j = 0; j <= 20; ++j) {
    ga.col(j) = std::cos(0.2 * j) * a;
    gb.col(j) = (0.2 * j) * b;
  }
  const SourceSamples sa{0.2, ga}, sb{0.2, gb}, sab{0.2, ga + gb};
  WaveState z{Vec::Zero(a.size()), Vec::Zero(a.size()), 0.0, {}};
  const Vec ua = propagate_exact(st.s, z, 3.9, &sa).u;
  const Vec ub = propagate_exact(st.s, z, 3.9, &sb).u;
  const Vec uab = propagate_exact(st.s, z, 3.9, &sab).u;
  EXPECT_LT(rel(uab, ua + ub), 1e-12);
}

TEST(Trajectory, MatchesExactAtSamples) {
  Rig st(MetricFamily::radial_bump, 2, 10, 4.0);
  const Vec u0 = bump(st.model.grid, 2.0);
  const Vec u1 = bump(st.model.grid, 1.0);
  const auto tr = propagate_trajectory(st.s, u0, u1, 0.125, 24);
  ASSERT_EQ(tr.count(), 25);
  const auto ex = propagate_exact(st.s, {u0, u1, 0.0, {}}, 3.0);
  EXPECT_LT(rel(st.s.from_eigen(tr.cu.col(24)), ex.u), 1e-11);
  const auto d = time_derivatives(st.s, tr, 2, nullptr);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_LT((d[2] + st.s.eigenvalues.asDiagonal() * tr.cu).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Leapfrog, RejectsCflViolation) {
  Rig st(MetricFamily::flat, 1, 40, 4.0);
  const double smax = st.s.eigenvalues.maxCoeff();
  WaveState s0{bump(st.model.grid, 1.0), Vec::Zero(40), 0.0, {}};
  EXPECT_THROW(propagate_leapfrog(st.model.P, s0, 1.9 / std::sqrt(smax), 10), Error);
}

TEST(Leapfrog, SecondOrderAgainstExact) {
  Rig st(MetricFamily::radial_bump, 1, 60, 6.0);
  WaveState s0{bump(st.model.grid, 3.0), Vec::Zero(60), 0.0, {}};
  const auto ex = propagate_exact(st.s, s0, 2.0);
  const double smax = st.s.eigenvalues.maxCoeff();
  const auto a = propagate_leapfrog(st.model.P, s0, 0.02, 100, nullptr, smax);
  const auto b = propagate_leapfrog(st.model.P, s0, 0.01, 200, nullptr, smax);
  EXPECT_NEAR(a.t, 2.0, 1e-12);
  const double ea = rel(a.u, ex.u), eb = rel(b.u, ex.u);
  EXPECT_LT(eb, 1e-3);
  EXPECT_GT(ea / eb, 3.0);
  EXPECT_LT(ea / eb, 5.0);
}

TEST(HalfWave, GroupLawAndUnitarity) {
  Rig st(MetricFamily::anisotropic_bump, 2, 10, 4.0);
  const CVec v = bump(st.model.grid, 2.0).cast<cplx>();
  const CVec a = half_wave(st.s, half_wave(st.s, v, 1.3), 0.9);
  const CVec b = half_wave(st.s, v, 2.2);
  EXPECT_LT((a - b).norm(), 1e-12 * v.norm());
  EXPECT_NEAR(b.norm(), v.norm(), 1e-12 * v.norm());
  EXPECT_LT((half_wave(st.s, b, -2.2) - v).norm(), 1e-12 * v.norm());
}

TEST(FirstOrder, DiagonalFormReproducesWave) {
  Rig st(MetricFamily::radial_bump, 2, 10, 4.0);
  const FirstOrderSystem sys(st.s);
  EXPECT_LT(sys.unitarity_residual(), 1e-15);
  EXPECT_LT(sys.diagonalization_residual(), 1e-14);
  const Vec u0 = bump(st.model.grid, 2.0), u1 = bump(st.model.grid, 1.5, Point(0.5, 0, 0));
  const auto [u, v] = sys.evolve(u0.cast<cplx>(), u1.cast<cplx>(), 2.5);
  const auto ex = propagate_exact(st.s, {u0, u1, 0.0, {}}, 2.5);
  EXPECT_LT((u.real() - ex.u).norm(), 1e-10 * ex.u.norm());
  EXPECT_LT((v.real() - ex.v).norm(), 1e-10 * ex.v.norm());
  EXPECT_LT(u.imag().norm(), 1e-12 * ex.u.norm());
}

TEST(FirstOrder, GeneratorMatchesTimeDerivative) {
  Rig st(MetricFamily::flat, 1, 30, 5.0);
  const FirstOrderSystem sys(st.s);
  const CVec u0 = bump(st.model.grid, 2.0).cast<cplx>();
  const CVec v0 = CVec::Zero(30);
  const double e = 1e-5;
  const auto [up, vp] = sys.evolve(u0, v0, e);
  const auto [um, vm] = sys.evolve(u0, v0, -e);
  const auto [Ru, Rv] = sys.apply_R(u0, v0);
  const cplx I(0.0, 1.0);
  // i d/dt w = R w
  EXPECT_LT((I * (vp - vm) / (2 * e) - Rv).norm(), 1e-6 * Rv.norm());
  EXPECT_LT((I * (up - um) / (2 * e) - Ru).norm(), 1e-6 * std::max(1.0, Rv.norm()));
}

TEST(FiniteSpeed, FlatTailOutsideLightCone) {
  Rig st(MetricFamily::flat, 1, 201, 20.0);
  WaveState s0{bump(st.model.grid, 1.0), Vec::Zero(201), 0.0, {}};
  const auto s1 = propagate_exact(st.s, s0, 3.0);
  double inside = 0.0, outside = 0.0;
  for (Eigen::Index i = 0; i < 201; ++i) {
    double& slot = std::abs(st.model.grid.coordinate(static_cast<int>(i))) > 8.0 ? outside : inside;
    slot = std::max(slot, std::abs(s1.u[i]));
  }
  EXPECT_GT(inside, 0.1);
  EXPECT_LT(outside, 1e-4 * inside);
}
