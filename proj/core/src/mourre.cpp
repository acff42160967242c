#include "aew/mourre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aew/linalg.hpp"

namespace aew {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::low: return "low";
    case Regime::intermediate: return "intermediate";
    case Regime::high: return "high";
  }
  return "?";
}

namespace {

void require_dense(const SpectralData& s) {
  if (!s.dense()) throw Error("conjugate operators need the dense eigendecomposition");
}

double spectral_scale(const ConjugateOperator& c) {
  return c.regime == Regime::low ? c.lambda : 1.0;
}

// Columns of V selected by idx.
Mat columns(const Mat& V, const std::vector<Eigen::Index>& idx) {
  Mat out(V.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = V.col(idx[j]);
  return out;
}

// Matrix function of the symmetric PSD matrix E through its eigendecomposition.
Mat psd_function(const Mat& E, const std::function<double(double)>& f) {
  Mat Q = 0.5 * (E + E.transpose());
  const Vec e = symmetric_eigen(Q);
  Vec fe(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) fe[i] = f(std::max(e[i], 0.0));
  return Q * fe.asDiagonal() * Q.transpose();
}

// Position of each eigen-index inside the support, -1 outside.
std::vector<Eigen::Index> support_positions(const ConjugateOperator& c, Eigen::Index n) {
  std::vector<Eigen::Index> pos(static_cast<std::size_t>(n), -1);
  for (std::size_t p = 0; p < c.support.size(); ++p)
    pos[static_cast<std::size_t>(c.support[p])] = static_cast<Eigen::Index>(p);
  return pos;
}

std::vector<Eigen::Index> indices_where(const Vec& r, const Interval& I) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index k = 0; k < r.size(); ++k)
    if (I.contains(r[k])) out.push_back(k);
  return out;
}

}  // namespace

Mat ConjugateOperator::grid_matrix(const SpectralData& s) const {
  const Mat Vs = columns(s.eigenvectors, support);
  return Vs * S * Vs.transpose();
}

ConjugateOperator conjugate_with_cutoff(Regime regime, const SpectralData& s,
                                        const DiscreteModel& model, double lambda,
                                        const std::function<double(double)>& f) {
  require_dense(s);
  ConjugateOperator c;
  c.regime = regime;
  c.lambda = lambda;
  const Eigen::Index n = s.size();
  c.cutoff.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    c.cutoff[k] = f(s.eigenvalues[k]);
    if (c.cutoff[k] != 0.0) c.support.push_back(k);
  }
  const Mat Vs = columns(s.eigenvectors, c.support);
  const Mat AV = model.A0 * Vs;
  Mat S = Vs.transpose() * AV;
  for (Eigen::Index j = 0; j < S.cols(); ++j)
    for (Eigen::Index i = 0; i < S.rows(); ++i)
      S(i, j) *= c.cutoff[c.support[i]] * c.cutoff[c.support[j]];
  double cmax = 0.0;
  for (Eigen::Index k : c.support) cmax = std::max(cmax, std::abs(c.cutoff[k]));
  const double scale = cmax * cmax * AV.cwiseAbs().maxCoeff();
  c.antisymmetry_residual =
      scale > 0.0 ? (S + S.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
  c.S = 0.5 * (S - S.transpose());
  return c;
}

ConjugateOperator conjugate(Regime regime, const SpectralData& s, const DiscreteModel& model,
                            double lambda, const DyadicPartition& partition) {
  switch (regime) {
    case Regime::low:
      return conjugate_with_cutoff(regime, s, model, lambda,
                                   [&](double x) { return partition.phi(lambda * x); });
    case Regime::intermediate:
      return conjugate_with_cutoff(regime, s, model, 1.0,
                                   [&](double x) { return partition.phi(x); });
    case Regime::high:
      if (!(lambda > 0.0)) throw Error("high-frequency threshold must be positive");
      return conjugate_with_cutoff(regime, s, model, lambda,
                                   [&](double x) { return 1.0 - smooth_cutoff(x / lambda); });
  }
  throw Error("unknown regime");
}

MourreReport mourre_check(const ConjugateOperator& c, const SpectralData& s, const Interval& I,
                          double delta, double slack) {
  require_dense(s);
  MourreReport rep;
  rep.interval = I;
  rep.lambda = c.lambda;
  rep.slack = slack;
  const double scale = spectral_scale(c);
  const Vec lam_sigma = scale * s.eigenvalues;
  const Vec r = lam_sigma.cwiseSqrt();
  const auto in_I = indices_where(lam_sigma, I);
  if (in_I.empty())
    throw Error("spectral window [" + format_number(I.lo) + ", " + format_number(I.hi) +
                "] contains no eigenvalue at lambda = " + format_number(c.lambda));
  const auto pos = support_positions(c, s.size());
  const auto m = static_cast<Eigen::Index>(in_I.size());
  rep.rank = m;

  Mat K = Mat::Zero(m, m);
  for (Eigen::Index b = 0; b < m; ++b)
    for (Eigen::Index a = 0; a < m; ++a) {
      const auto ka = in_I[a], kb = in_I[b];
      const auto pa = pos[ka], pb = pos[kb];
      if (pa >= 0 && pb >= 0) K(a, b) = (r[ka] - r[kb]) * c.S(pa, pb);
    }
  const double kscale = K.cwiseAbs().maxCoeff();
  if (kscale > 0.0 && (K - K.transpose()).cwiseAbs().maxCoeff() > 1e-9 * kscale)
    throw Error("commutator is not symmetric");
  rep.commutator_trace = K.trace();
  Mat Kc = K;
  rep.commutator_min = symmetric_eigen(Kc)[0];
  rep.paper_bound = delta * delta * std::sqrt(std::max(I.lo, 0.0)) / 2.0;
  rep.pass = rep.commutator_min >= rep.paper_bound * (1.0 - slack);

  // remainder columns on ran 1_I; rows are support U I
  std::vector<Eigen::Index> rows = c.support;
  for (auto k : in_I)
    if (pos[k] < 0) rows.push_back(k);
  Mat R = Mat::Zero(static_cast<Eigen::Index>(rows.size()), m);
  for (Eigen::Index b = 0; b < m; ++b) {
    const auto kb = in_I[b];
    for (std::size_t a = 0; a < rows.size(); ++a) {
      const auto ka = rows[a];
      double v = 0.0;
      if (pos[ka] >= 0 && pos[kb] >= 0) v = (r[ka] - r[kb]) * c.S(pos[ka], pos[kb]);
      if (ka == kb) v -= r[ka] * c.cutoff[ka] * c.cutoff[ka];
      R(static_cast<Eigen::Index>(a), b) = v;
    }
  }
  rep.remainder_norm = spectral_norm(R);
  return rep;
}

EstimateReport mourre_scan(const SpectralData& s, const DiscreteModel& model,
                           const std::vector<double>& lambdas, const Interval& I, double delta,
                           double slack, const DyadicPartition& partition) {
  EstimateReport rep;
  rep.experiment = "mourre-check";
  rep.add_param("delta", delta);
  rep.add_param("slack", slack);
  rep.add_param("I_lo", I.lo);
  rep.add_param("I_hi", I.hi);
  bool seen_pass = false;
  bool monotone = true;
  std::vector<double> xs, ys;
  for (double lambda : lambdas) {
    ReportRow row;
    row.params = {{"lambda", format_number(lambda)}};
    try {
      const auto c = conjugate(Regime::low, s, model, lambda, partition);
      const auto m = mourre_check(c, s, I, delta, slack);
      row.measured = m.commutator_min;
      row.predicted = m.paper_bound;
      row.residual = m.remainder_norm;
      row.params.emplace_back("rank", std::to_string(m.rank));
      row.params.emplace_back("trace", format_number(m.commutator_trace));
      row.verdict = m.pass ? "pass" : "fail";
      if (seen_pass && !m.pass) monotone = false;
      seen_pass = seen_pass || m.pass;
      if (m.remainder_norm > 0.0) {
        xs.push_back(lambda);
        ys.push_back(m.remainder_norm);
      }
    } catch (const Error& e) {
      row.verdict = "empty-window";
      row.measured = std::numeric_limits<double>::quiet_NaN();
      rep.note(e.what());
      monotone = monotone && !seen_pass;
    }
    rep.rows.push_back(row);
  }
  if (xs.size() >= 3) rep.fit = fit_power_law(xs, ys);
  rep.plot_x = xs;
  rep.plot_y = ys;
  if (!monotone) rep.note("non-monotone verdicts over lambda");
  rep.verdict = seen_pass && monotone ? Verdict::pass : Verdict::fail;
  return rep;
}

std::vector<double> default_eta_grid() {
  std::vector<double> eta;
  for (int k = 2; k <= 12; ++k) eta.push_back(std::pow(10.0, -0.5 * k));
  return eta;
}

LapResult lap_constant(const SpectralData& s, const ConjugateOperator& A, const Interval& J,
                       double mu, const std::vector<double>& eta_grid) {
  require_dense(s);
  if (J.empty() || eta_grid.empty()) throw Error("empty interval or eta grid");
  const double scale = spectral_scale(A);
  const Vec r = (scale * s.eigenvalues).cwiseSqrt();
  const Mat W = psd_function(A.S.transpose() * A.S,
                             [mu](double e) { return std::pow(1.0 + e, -0.5 * mu); });
  const auto pos = support_positions(A, s.size());
  const auto m = A.rank();

  LapResult out;
  out.eta = eta_grid;
  std::sort(out.eta.begin(), out.eta.end(), std::greater<>());
  const int n_re = 21;
  for (double eta : out.eta) {
    double best = 0.0;
    for (int q = 0; q < n_re; ++q) {
      const cplx z(J.lo + J.width() * q / (n_re - 1), eta);
      double off = 0.0;
      for (Eigen::Index k = 0; k < r.size(); ++k)
        if (pos[k] < 0) off = std::max(off, 1.0 / std::abs(r[k] - z));
      double on = 0.0;
      if (m > 0) {
        CVec dz(m);
        for (Eigen::Index p = 0; p < m; ++p) dz[p] = 1.0 / (r[A.support[p]] - z);
        const CMat B = W.cast<cplx>() * dz.asDiagonal() * W.cast<cplx>();
        on = spectral_norm(B);
      }
      best = std::max({best, on, off});
    }
    out.max_over_re.push_back(best);
    out.constant = std::max(out.constant, best);
  }
  const auto k = out.max_over_re.size();
  out.last_ratio = k >= 2 ? out.max_over_re[k - 1] / out.max_over_re[k - 2] : 1.0;
  out.stabilized = out.last_ratio < 2.0;
  return out;
}

EstimateReport kato_smoothness_check(const SpectralData& s, const ConjugateOperator& A,
                                     const Interval& J, double mu, const Mat& samples,
                                     double T_max, double lap_C) {
  require_dense(s);
  EstimateReport rep;
  rep.experiment = "kato-smoothness";
  rep.add_param("mu", mu);
  rep.add_param("T_max", T_max);
  rep.add_param("lap_C", lap_C);
  const double scale = spectral_scale(A);
  const Vec r = (scale * s.eigenvalues).cwiseSqrt();
  const auto idx = indices_where(r, J);
  const auto pos = support_positions(A, s.size());
  const Mat W2s = psd_function(A.S.transpose() * A.S,
                               [mu](double e) { return std::pow(1.0 + e, -mu); });
  const auto m = static_cast<Eigen::Index>(idx.size());
  Mat W2 = Mat::Identity(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      const auto pa = pos[idx[a]], pb = pos[idx[b]];
      if (pa >= 0 && pb >= 0) W2(a, b) = W2s(pa, pb);
    }

  std::vector<double> Ts;
  for (double T = 2.0; T <= T_max * (1 + 1e-12); T *= 2.0) Ts.push_back(T);
  if (Ts.empty()) Ts.push_back(T_max);

  std::vector<Verdict> verdicts;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const Vec c = s.eigenvectors.transpose() * samples.col(j);
    Vec cJ(m);
    for (Eigen::Index a = 0; a < m; ++a) cJ[a] = c[idx[a]];
    const double unorm2 = samples.col(j).squaredNorm();
    std::vector<double> values;
    for (double T : Ts) {
      double I = 0.0;
      for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) {
          const double w = r[idx[a]] - r[idx[b]];
          const double kern = std::abs(w * T) < 1e-12 ? T : std::sin(w * T) / w;
          I += cJ[a] * cJ[b] * W2(a, b) * kern;
        }
      values.push_back(I);
      ReportRow row;
      row.params = {{"sample", std::to_string(j)}, {"T", format_number(T)}};
      row.measured = I;
      row.predicted = 8.0 * lap_C * unorm2;
      row.residual = row.predicted > 0.0 ? I / row.predicted : 0.0;
      row.verdict = mu > 0.5 ? (row.residual <= 1.0 ? "pass" : "fail") : "n/a";
      rep.rows.push_back(row);
    }
    if (mu > 0.5) {
      verdicts.push_back(rep.rows.back().residual <= 1.0 ? Verdict::pass : Verdict::fail);
    } else {
      const auto fit = fit_power_law_upper(Ts, values);
      rep.fit = fit;
      rep.prediction = 1.0 - 2.0 * mu;
      rep.plot_x = Ts;
      rep.plot_y = values;
      if (fit.points < 2 || fit.r_squared < 0.9)
        verdicts.push_back(Verdict::inconclusive);
      else
        verdicts.push_back(fit.slope <= rep.prediction + 0.1 ? Verdict::pass : Verdict::fail);
    }
  }
  rep.verdict = combine(verdicts);
  return rep;
}

EstimateReport weight_bound_scan(const SpectralData& s, const DiscreteModel& model,
                                 const std::vector<double>& lambdas, double mu,
                                 const DyadicPartition& partition) {
  require_dense(s);
  EstimateReport rep;
  rep.experiment = "weight-bound";
  rep.add_param("mu", mu);
  rep.prediction = -0.5 * mu;
  const Vec wx2 = model.weight(-2.0 * mu);
  std::vector<double> xs, abs_norm, br_norm;
  for (double lambda : lambdas) {
    const auto c = conjugate(Regime::low, s, model, lambda, partition);
    const auto m = c.rank();
    if (m == 0) {
      rep.note("empty cutoff support at lambda = " + format_number(lambda));
      continue;
    }
    const Mat E = c.S.transpose() * c.S;
    const Mat B1 = psd_function(E, [mu](double e) { return std::pow(e, 0.5 * mu); });
    const Mat Vs = columns(s.eigenvectors, c.support);
    const Mat G1 = Vs.transpose() * wx2.asDiagonal() * Vs;
    Mat M1 = B1 * G1 * B1;
    const double n1 = std::sqrt(std::max(symmetric_eigen(M1).maxCoeff(), 0.0));

    std::vector<Eigen::Index> T;
    for (Eigen::Index k = 0; k < s.size(); ++k)
      if (partition.phi_tilde(lambda * s.eigenvalues[k]) != 0.0) T.push_back(k);
    const auto t = static_cast<Eigen::Index>(T.size());
    const auto pos = support_positions(c, s.size());
    const Mat Bs = psd_function(E, [mu](double e) { return std::pow(1.0 + e, 0.5 * mu); });
    Mat CT = Mat::Identity(t, t);
    Vec psi(t);
    for (Eigen::Index a = 0; a < t; ++a) {
      psi[a] = partition.phi_tilde(lambda * s.eigenvalues[T[a]]);
      for (Eigen::Index b = 0; b < t; ++b) {
        const auto pa = pos[T[a]], pb = pos[T[b]];
        if (pa >= 0 && pb >= 0) CT(a, b) = Bs(pa, pb);
      }
    }
    const Mat VT = columns(s.eigenvectors, T);
    const Mat CP = CT * psi.asDiagonal();
    Mat M2 = CP * (VT.transpose() * wx2.asDiagonal() * VT) * CP.transpose();
    const double n2 = std::sqrt(std::max(symmetric_eigen(M2).maxCoeff(), 0.0));

    xs.push_back(lambda);
    abs_norm.push_back(n1);
    br_norm.push_back(n2);
    for (int which = 0; which < 2; ++which) {
      ReportRow row;
      row.params = {{"lambda", format_number(lambda)}, {"norm", which == 0 ? "abs" : "bracket"}};
      row.measured = which == 0 ? n1 : n2;
      row.predicted = std::pow(lambda, -0.5 * mu);
      row.residual = row.measured / row.predicted;
      row.verdict = "n/a";
      rep.rows.push_back(row);
    }
  }
  if (xs.size() < 3) {
    rep.note("too few scales with nonempty support");
    rep.verdict = Verdict::inconclusive;
    return rep;
  }
  const auto f1 = fit_power_law_upper(xs, abs_norm);
  const auto f2 = fit_power_law_upper(xs, br_norm);
  rep.fit = f1;
  rep.plot_x = xs;
  rep.plot_y = abs_norm;
  rep.note("bracket-norm slope " + format_number(f2.slope) + " (R^2 " +
           format_number(f2.r_squared) + ")");
  std::vector<Verdict> v;
  for (const auto& f : {f1, f2}) {
    if (f.points < 2 || f.r_squared < 0.9)
      v.push_back(Verdict::inconclusive);
    else
      v.push_back(f.slope <= rep.prediction + 0.2 ? Verdict::pass : Verdict::fail);
  }
  rep.verdict = combine(v);
  return rep;
}

}  // namespace aew
