#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "aew/estimates.hpp"

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

}  // namespace

TEST(PowerFit, RecoversExponent) {
  std::vector<double> x, y;
  for (int k = 0; k < 8; ++k) {
    x.push_back(std::pow(2.0, k));
    y.push_back(3.0 * std::pow(x.back(), -0.7));
  }
  const auto f = fit_power_law(x, y);
  EXPECT_NEAR(f.slope, -0.7, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_EQ(f.points, 8u);
}

TEST(PowerFit, UpperFitDropsFirstOctave) {
  const std::vector<double> x{1, 1.5, 2, 4, 8};
  const std::vector<double> y{100, 50, 4, 16, 64};
  const auto f = fit_power_law_upper(x, y);
  EXPECT_EQ(f.points, 3u);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
}

TEST(Report, CsvLayoutAndNumbers) {
  EstimateReport r;
  r.experiment = "demo";
  r.add_param("mu", 0.25);
  ReportRow row;
  row.params = {{"T", "2"}};
  row.measured = 0.1;
  row.verdict = "pass";
  r.rows.push_back(row);
  r.verdict = Verdict::pass;
  std::ostringstream os;
  write_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "experiment,parameters,measured,predicted,residual,verdict");
  std::getline(is, line);
  EXPECT_EQ(line, "demo,T=2,0.1,0,0,pass");
  std::getline(is, line);
  EXPECT_EQ(line.rfind("demo,row=summary", 0), 0u);
  EXPECT_EQ(std::stod(format_number(0.1 + 0.2)), 0.1 + 0.2);
  const std::vector<Verdict> v{Verdict::pass, Verdict::inconclusive};
  EXPECT_EQ(combine(v), Verdict::inconclusive);
}

TEST(Weights, FBracket) {
  EXPECT_DOUBLE_EQ(F_weight(1.0, 0.0, 100.0), 1.0);
  EXPECT_DOUBLE_EQ(F_weight(0.25, 0.0, 16.0), 4.0);
  EXPECT_DOUBLE_EQ(F_bracket(0.25, 0.0, 16.0), std::sqrt(17.0));
}

TEST(Kss, ZeroDataIsInconclusive) {
  Rig st(MetricFamily::flat, 2, 10, 8.0);
  const Vec z = Vec::Zero(st.s.size());
  const auto rep = kss_scan(st.model, st.s, 1.0, {{"zero", z, z}}, {1, 2, 4}, nullptr, {});
  EXPECT_EQ(rep.verdict, Verdict::inconclusive);
  for (const auto& row : rep.rows) EXPECT_EQ(row.residual, 0.0);
}

TEST(Kss, RejectsMuOutsideRange) {
  Rig st(MetricFamily::flat, 1, 10, 8.0);
  const auto data = standard_data(st.model.grid, 2.0);
  EXPECT_THROW(kss_scan(st.model, st.s, 1.5, data, {1, 2}, nullptr, {}), Error);
  EXPECT_THROW(kss_higher(st.model, st.s, 0.25, 1, data, {1, 2}, {}), Error);
}

TEST(Kss, LhsIsMonotoneInT) {
  Rig st(MetricFamily::radial_bump, 2, 12, 8.0);
  const auto data = standard_data(st.model.grid, 2.0);
  const auto ser = kss_series(st.model, st.s, 0.5, data[0], {0.5, 1, 2, 3, 4}, nullptr, {});
  for (std::size_t i = 1; i < ser.lhs2.size(); ++i) EXPECT_GT(ser.lhs2[i], ser.lhs2[i - 1]);
  EXPECT_LT(ser.richardson, 1e-3);
}

TEST(Kss, SqrtVariantMatchesGradientWhenFlat) {
  Rig st(MetricFamily::flat, 2, 12, 8.0);
  const auto data = standard_data(st.model.grid, 2.0);
  KssOptions grad, root;
  root.sqrt_variant = true;
  const auto a = kss_series(st.model, st.s, 0.0, data[2], {1, 2}, nullptr, grad);
  const auto b = kss_series(st.model, st.s, 0.0, data[2], {1, 2}, nullptr, root);
  for (std::size_t i = 0; i < a.lhs2.size(); ++i) EXPECT_NEAR(b.lhs2[i], a.lhs2[i], 1e-10 * a.lhs2[i]);
}

TEST(Kss, ConstantSourceRaisesRhs) {
  Rig st(MetricFamily::flat, 1, 30, 8.0);
  const Vec z = Vec::Zero(st.s.size());
  const SeparableSource g{"constant", bump(st.model.grid, 2.0), [](double) { return 1.0; }};
  const auto ser = kss_series(st.model, st.s, 1.0, {"zero", z, z}, {1, 2}, &g, {});
  const double bn = st.model.l2(g.spatial);
  EXPECT_NEAR(ser.rhs[0], bn, 1e-12 * bn);
  EXPECT_NEAR(ser.rhs[1], 2.0 * bn, 1e-12 * bn);
  EXPECT_GT(ser.lhs2[1], 0.0);
}

TEST(ZWords, CountsAndOrdering) {
  Rig st(MetricFamily::flat, 3, 4, 4.0);
  EXPECT_EQ(z_words(st.model, 0).size(), 1u);
  EXPECT_EQ(z_words(st.model, 1).size(), 8u);
  const auto w2 = z_words(st.model, 2);
  EXPECT_EQ(w2.size(), 36u);
  EXPECT_EQ(w2.front().label, "id");
  EXPECT_EQ(w2[1].label, "t");
  EXPECT_EQ(w2[2].label, "t*t");
  EXPECT_EQ(w2[2].time_order, 2);
  Rig st2(MetricFamily::flat, 2, 4, 4.0);
  EXPECT_EQ(z_words(st2.model, 2).size(), 15u);
}

TEST(Higher, OrderZeroMatchesFirstOrderEstimate) {
  Rig st(MetricFamily::radial_bump, 2, 12, 8.0);
  const auto data = standard_data(st.model.grid, 2.0);
  const std::vector<double> T{1, 2, 4};
  const auto h = kss_higher_series(st.model, st.s, 1.0, 0, data[1], T, {});
  const auto k = kss_series(st.model, st.s, 1.0, data[1], T, nullptr, {});
  ASSERT_EQ(h.words.size(), 1u);
  for (std::size_t i = 0; i < T.size(); ++i) {
    const double n = h.word_norms[0][i];
    EXPECT_NEAR(n * n, k.lhs2[i], 1e-9 * k.lhs2[i]);
  }
}

TEST(Source, ZeroSourceGivesZeroResponse) {
  Rig st(MetricFamily::flat, 1, 20, 8.0);
  const SeparableSource g{"zero", Vec::Zero(st.s.size()), [](double) { return 1.0; }};
  const auto ser = weighted_source_series(st.model, st.s, 1.0, g, {1, 2}, {});
  for (double v : ser.lhs2) EXPECT_EQ(v, 0.0);
  for (double v : ser.rhs2) EXPECT_EQ(v, 0.0);
}

TEST(Source, RhsIsWeightedTimeIntegral) {
  Rig st(MetricFamily::flat, 1, 20, 8.0);
  const SeparableSource g{"cosine", bump(st.model.grid, 2.0), [](double t) { return std::cos(t); }};
  const double mu = 0.5;
  const auto ser = weighted_source_series(st.model, st.s, mu, g, {2}, {});
  const double bw2 = st.model.grid.cell_volume() *
                     (st.model.weight(mu).array() * g.spatial.array()).square().sum();
  const double T = ser.T[0];
  EXPECT_NEAR(ser.rhs2[0], bw2 * (0.5 * T + 0.25 * std::sin(2.0 * T)), 1e-8 * bw2);
}

TEST(Resolvent, UnweightedNormIsBottomOfSpectrum) {
  const auto metric = make_metric(MetricFamily::flat, 1, 2.0, 0.0);
  const auto model = assemble_operators(metric, build_grid(1, 64, 10.0));
  const double smin = decompose(model, OperatorKind::P0, SpectralMode::dense_eig).eigenvalues.minCoeff();
  const std::vector<double> lambdas{1, 4, 16, 64};
  const auto rep = resolvent_scan(model, OperatorKind::P0, 0.0, 0.0, lambdas);
  ASSERT_EQ(rep.rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const double expect = 1.0 / (lambdas[i] * smin + 1.0);
    EXPECT_NEAR(rep.rows[i].measured, expect, 1e-6 * expect);
  }
}

TEST(Equivalences, FlatConstantsAreOne) {
  Rig st(MetricFamily::flat, 2, 10, 6.0);
  const auto c = equivalence_constants(st.model, st.s);
  EXPECT_NEAR(c.b53_min, 1.0, 1e-12);
  EXPECT_NEAR(c.b53_max, 1.0, 1e-12);
}

TEST(Equivalences, RadialConstantsBracketOne) {
  Rig st(MetricFamily::radial_bump, 2, 10, 6.0);
  const auto c = equivalence_constants(st.model, st.s);
  EXPECT_GT(c.b53_min, 0.0);
  EXPECT_LE(c.b53_min, c.b53_max);
  EXPECT_LT(c.b53_max / c.b53_min, 10.0);
}
