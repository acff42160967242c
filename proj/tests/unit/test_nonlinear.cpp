#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "aew/nonlinear.hpp"

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

NonlinearOptions quick() {
  NonlinearOptions o;
  o.dt = 0.0625;
  o.max_iter = 12;
  return o;
}

}  // namespace

TEST(QuadraticForm, TimeSquaredEvaluatesPointwise) {
  const auto q = QuadraticForm::time_squared(2);
  EXPECT_FALSE(q.uses_gradient());
  Mat ut(3, 2);
  ut << 1, 2, -3, 0.5, 0, 1;
  const Mat G = q.evaluate(ut, {});
  EXPECT_EQ(G, ut.cwiseProduct(ut));
  EXPECT_TRUE(QuadraticForm::zero(3).is_zero());
  QuadraticForm bad{Mat::Zero(2, 3)};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(DataNorm, OrderAndHomogeneity) {
  EXPECT_EQ(default_data_order(1), 2);
  EXPECT_EQ(default_data_order(3), 4);
  Rig st(MetricFamily::radial_bump, 2, 16, 6.0);
  const Vec u0 = bump(st.model.grid, 2.0), u1 = bump(st.model.grid, 1.5, Point(0.5, 0, 0));
  const double n = data_norm(st.model, u0, u1, 2);
  EXPECT_GT(n, 0.0);
  EXPECT_NEAR(data_norm(st.model, 3.0 * u0, 3.0 * u1, 2), 3.0 * n, 1e-12 * n);
  EXPECT_GT(data_norm(st.model, u0, u1, 3), n);
  EXPECT_EQ(data_norm(st.model, Vec::Zero(u0.size()), Vec::Zero(u0.size()), 4), 0.0);
}

TEST(Functional, ZeroAndHomogeneous) {
  Rig st(MetricFamily::flat, 2, 10, 6.0);
  const auto zero = zero_iterate(st.s, 0.125, 16);
  EXPECT_EQ(functional_M(st.model, st.s, zero, default_mu_d(2), 2, 2), 0.0);
  const Vec u0 = bump(st.model.grid, 2.0), z = Vec::Zero(u0.size());
  const auto lin = QuadraticForm::zero(2);
  const auto a = picard_step(st.model, st.s, zero, {"a", u0, z}, lin);
  const auto b = picard_step(st.model, st.s, zero, {"b", 2.0 * u0, z}, lin);
  const double ma = functional_M(st.model, st.s, a, default_mu_d(2), 2, 2);
  EXPECT_GT(ma, 0.0);
  EXPECT_NEAR(functional_M(st.model, st.s, b, default_mu_d(2), 2, 2), 2.0 * ma, 1e-10 * ma);
  EXPECT_NEAR(functional_M(st.model, st.s, difference(b, a), default_mu_d(2), 2, 2), ma, 1e-10 * ma);
}

TEST(Picard, LinearProblemConvergesImmediately) {
  Rig st(MetricFamily::flat, 1, 24, 8.0);
  const Vec u0 = bump(st.model.grid, 2.0), z = Vec::Zero(u0.size());
  const auto run = picard_run(st.model, st.s, {"d", u0, z}, QuadraticForm::zero(1), 2.0, quick());
  EXPECT_TRUE(run.converged);
  EXPECT_EQ(run.iterations, 2);
  EXPECT_EQ(run.A.front(), 0.0);
}

TEST(Picard, ZeroDataStaysZero) {
  Rig st(MetricFamily::flat, 1, 24, 8.0);
  const Vec z = Vec::Zero(st.s.size());
  const auto run =
      picard_run(st.model, st.s, {"z", z, z}, QuadraticForm::time_squared(1), 2.0, quick());
  for (double m : run.M) EXPECT_EQ(m, 0.0);
  EXPECT_EQ(run.last.traj.cu.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Picard, SmallDataContracts) {
  Rig st(MetricFamily::flat, 2, 12, 8.0);
  const Vec u0 = 0.01 * bump(st.model.grid, 2.0), z = Vec::Zero(u0.size());
  const auto run =
      picard_run(st.model, st.s, {"d", u0, z}, QuadraticForm::time_squared(2), 2.0, quick());
  EXPECT_TRUE(run.converged);
  ASSERT_GE(run.A.size(), 2u);
  for (std::size_t k = 1; k < run.A.size(); ++k) EXPECT_LE(run.A[k], 0.5 * run.A[k - 1]);
}

TEST(Lifespan, LinearReachesHorizon) {
  Rig st(MetricFamily::flat, 1, 24, 8.0);
  const WaveData shape{"d", bump(st.model.grid, 2.0), Vec::Zero(st.s.size())};
  const auto rec = lifespan(st.model, st.s, shape, 0.1, QuadraticForm::zero(1), 4.0, quick());
  EXPECT_TRUE(rec.truncated);
  EXPECT_EQ(rec.T_obs, 4.0);
  EXPECT_EQ(rec.reason, Termination::horizon_reached);
}

TEST(Lifespan, SweepOfLinearProblemIsInconclusive) {
  Rig st(MetricFamily::flat, 1, 24, 8.0);
  const WaveData shape{"d", bump(st.model.grid, 2.0), Vec::Zero(st.s.size())};
  std::vector<LifespanRecord> recs;
  const auto rep = lifespan_sweep(st.model, st.s, shape, {0.4, 0.2, 0.1, 0.05},
                                  QuadraticForm::zero(1), 2.0, quick(), &recs);
  EXPECT_EQ(rep.verdict, Verdict::inconclusive);
  ASSERT_EQ(recs.size(), 4u);
  std::ostringstream os;
  write_lifespan_csv(os, recs);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "delta,T_obs,reason,iterations,final_M");
}

TEST(Lifespan, SweepRejectsBadDeltaLists) {
  Rig st(MetricFamily::flat, 1, 12, 8.0);
  const WaveData shape{"d", bump(st.model.grid, 2.0), Vec::Zero(st.s.size())};
  const auto q = QuadraticForm::zero(1);
  EXPECT_THROW(lifespan_sweep(st.model, st.s, shape, {0.4, 0.2, 0.1}, q, 1.0, quick()), Error);
  EXPECT_THROW(lifespan_sweep(st.model, st.s, shape, {0.4, 0.2, 0.3, 0.1}, q, 1.0, quick()), Error);
}

TEST(Lifespan, LargeDataBreaksDown) {
  Rig st(MetricFamily::flat, 1, 24, 8.0);
  const WaveData shape{"d", bump(st.model.grid, 2.0), Vec::Zero(st.s.size())};
  auto o = quick();
  o.refinements = 2;
  const auto rec = lifespan(st.model, st.s, shape, 50.0, QuadraticForm::time_squared(1), 8.0, o);
  EXPECT_FALSE(rec.truncated);
  EXPECT_LT(rec.T_obs, 8.0);
}

TEST(Sobolev, SampleOutsideAnnulusIsZero) {
  Rig st(MetricFamily::flat, 2, 33, 8.0);
  Mat h(st.s.size(), 1);
  h.col(0) = bump(st.model.grid, 0.8);
  const auto rep = sobolev_weight_check(st.model, h, {4.0});
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].measured, 0.0);
  EXPECT_GT(rep.rows[0].predicted, 0.0);
}

TEST(Sobolev, AnnulusSamplesAreDeterministic) {
  const Grid g = build_grid(2, 41, 10.0);
  const Mat a = annulus_samples(g, {2, 4, 8});
  const Mat b = annulus_samples(g, {2, 4, 8});
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.cols(), 3);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_GT(a.col(j).maxCoeff(), 0.5);
  const auto metric = make_metric(MetricFamily::flat, 2, 2.0, 0.0);
  const auto model = assemble_operators(metric, g);
  const auto rep = sobolev_weight_check(model, a, {2, 4, 8});
  std::ostringstream x, y;
  write_csv(x, rep);
  write_csv(y, sobolev_weight_check(model, b, {2, 4, 8}));
  EXPECT_EQ(x.str(), y.str());
}
