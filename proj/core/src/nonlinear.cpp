#include "aew/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>

#include "aew/linalg.hpp"

namespace aew {

QuadraticForm QuadraticForm::zero(int d) { return {Mat::Zero(d + 1, d + 1)}; }

QuadraticForm QuadraticForm::time_squared(int d) {
  QuadraticForm f = zero(d);
  f.q(0, 0) = 1.0;
  return f;
}

bool QuadraticForm::uses_gradient() const {
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      if ((i > 0 || j > 0) && q(i, j) != 0.0) return true;
  return false;
}

void QuadraticForm::validate() const {
  if (q.rows() != q.cols() || q.rows() < 2) throw Error("quadratic form must be (1+d) x (1+d)");
  if (!q.allFinite()) throw Error("quadratic form has non-finite coefficients");
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 0.0) throw Error("quadratic form must be symmetric");
}

Mat QuadraticForm::evaluate(const Mat& ut, const std::vector<Mat>& grad) const {
  const auto d = q.rows() - 1;
  auto comp = [&](Eigen::Index a) -> const Mat& { return a == 0 ? ut : grad[static_cast<std::size_t>(a - 1)]; };
  Mat out = Mat::Zero(ut.rows(), ut.cols());
  for (Eigen::Index a = 0; a <= d; ++a)
    for (Eigen::Index b = a; b <= d; ++b) {
      const double c = a == b ? q(a, a) : 2.0 * q(a, b);
      if (c == 0.0) continue;
      if (static_cast<std::size_t>(std::max(a, b)) > grad.size())
        throw Error("gradient components missing for the quadratic form");
      out.array() += c * comp(a).array() * comp(b).array();
    }
  return out;
}

namespace {

// All nondecreasing index sequences of length <= n over `count` symbols, depth first.
template <class F>
void for_each_multi_index(int count, int n, F&& visit) {
  std::vector<int> stack;
  auto rec = [&](auto&& self, int first) -> void {
    visit(stack);
    if (static_cast<int>(stack.size()) == n) return;
    for (int i = first; i < count; ++i) {
      stack.push_back(i);
      self(self, i);
      stack.pop_back();
    }
  };
  rec(rec, 0);
}

Vec apply_word(const std::vector<const SpMat*>& fields, const std::vector<int>& word, Vec v) {
  for (auto it = word.rbegin(); it != word.rend(); ++it) v = *fields[static_cast<std::size_t>(*it)] * v;
  return v;
}

// sqrt(sum over |b| = j of ||Dc^b w||^2) for j = 0..J, h-weighted
std::vector<double> derivative_norms(const DiscreteModel& model, const Vec& w, int J) {
  std::vector<const SpMat*> dc;
  for (const auto& D : model.Dc) dc.push_back(&D);
  std::vector<double> sq(static_cast<std::size_t>(J + 1), 0.0);
  for_each_multi_index(static_cast<int>(dc.size()), J, [&](const std::vector<int>& b) {
    sq[b.size()] += apply_word(dc, b, w).squaredNorm();
  });
  const double hd = model.grid.cell_volume();
  std::vector<double> out;
  for (double v : sq) out.push_back(std::sqrt(hd * v));
  return out;
}

}  // namespace

int default_data_order(int d) { return 2 * ((d - 1 + 1) / 2 + 1); }

double data_norm(const DiscreteModel& model, const Vec& u0, const Vec& u1, int M) {
  if (M < 0) throw Error("data order must be nonnegative");
  std::vector<const SpMat*> rot;
  for (const auto& R : model.rot) rot.push_back(&R);
  double total = 0.0;
  for_each_multi_index(static_cast<int>(rot.size()), M + 1, [&](const std::vector<int>& a) {
    const int la = static_cast<int>(a.size());
    const auto n0 = derivative_norms(model, apply_word(rot, a, u0), M + 1 - la);
    for (double v : n0) total += v;
    if (la <= M) {
      const auto n1 = derivative_norms(model, apply_word(rot, a, u1), M - la);
      for (double v : n1) total += v;
    }
  });
  return total;
}

Iterate zero_iterate(const SpectralData& s, double dt, Eigen::Index n_steps) {
  Iterate it;
  it.traj.dt = dt;
  it.traj.cu = Mat::Zero(s.size(), n_steps + 1);
  it.traj.cv = Mat::Zero(s.size(), n_steps + 1);
  return it;
}

Iterate picard_step(const DiscreteModel& model, const SpectralData& s, const Iterate& prev,
                    const WaveData& data, const QuadraticForm& q) {
  const auto m = prev.traj.count();
  Iterate next;
  if (q.is_zero()) {
    next.traj = propagate_trajectory(s, data.u0, data.u1, prev.traj.dt, m - 1, nullptr);
    return next;
  }
  const Mat ut = s.eigenvectors * prev.traj.cv;
  std::vector<Mat> grad;
  if (q.uses_gradient()) {
    const Mat U = s.eigenvectors * prev.traj.cu;
    for (const auto& D : model.dtilde_node) grad.push_back(D * U);
  }
  const Mat G = q.evaluate(ut, grad);
  if (!G.allFinite()) throw Error("iteration_divergence: nonlinearity is not finite");
  next.source = s.eigenvectors.transpose() * G;
  next.traj = propagate_trajectory(s, data.u0, data.u1, prev.traj.dt, m - 1, &next.source);
  return next;
}

Iterate difference(const Iterate& a, const Iterate& b) {
  Iterate d;
  d.traj.dt = a.traj.dt;
  d.traj.cu = a.traj.cu - b.traj.cu;
  d.traj.cv = a.traj.cv - b.traj.cv;
  if (a.source.size() > 0 && b.source.size() > 0)
    d.source = a.source - b.source;
  else if (a.source.size() > 0)
    d.source = a.source;
  else if (b.source.size() > 0)
    d.source = -b.source;
  return d;
}

double default_mu_d(int d) { return (d - 1) / 4.0; }

double functional_M(const DiscreteModel& model, const SpectralData& s, const Iterate& it,
                    double mu_d, int M, int n) {
  if (M < 0 || n < 1) throw Error("functional needs M >= 0 and n >= 1");
  const Trajectory& tr = it.traj;
  const auto derivs =
      time_derivatives(s, tr, M + 1, it.source.size() > 0 ? &it.source : nullptr);
  const double hs = std::sqrt(model.grid.cell_volume());
  const Vec& sg = s.eigenvalues;
  double sup = 0.0;
  std::vector<double> energy(static_cast<std::size_t>(tr.count()), 0.0);
  for (int i = 0; i <= M + 1; ++i)
    for (int j = 0; i + j <= M + 1; ++j) {
      if (i + j == 0) continue;
      const Vec p = sg.array().pow(0.5 * j).matrix();
      const Eigen::ArrayXd n2 =
          (derivs[static_cast<std::size_t>(i)].array().colwise() * p.array()).square().colwise().sum();
      for (Eigen::Index c = 0; c < tr.count(); ++c)
        energy[static_cast<std::size_t>(c)] += hs * std::sqrt(n2[c]);
    }
  for (double e : energy) sup = std::max(sup, e);

  std::vector<Mat> fields;
  for (const auto& c : derivs) fields.push_back(s.eigenvectors * c);
  const double T = tr.dt * static_cast<double>(tr.count() - 1);
  const double K = T > 0.0 ? std::pow(T, 1.0 / n) : 1.0;
  double weighted = 0.0;
  for (const auto& w : z_words(model, M)) {
    const auto y = z_word_integrand(model, w, fields, mu_d);
    weighted += std::sqrt(std::max(simpson(y, tr.dt), 0.0));
  }
  return sup + weighted / K;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::horizon_reached: return "horizon_reached";
    case Termination::functional_blowup: return "functional_blowup";
    case Termination::iteration_divergence: return "iteration_divergence";
  }
  return "?";
}

PicardRun picard_run(const DiscreteModel& model, const SpectralData& s, const WaveData& data,
                     const QuadraticForm& q, double T, const NonlinearOptions& opts) {
  if (!(T > 0.0)) throw Error("window length must be positive");
  const auto steps = std::max<Eigen::Index>(1, std::llround(T / opts.dt));
  const double dt = T / static_cast<double>(steps);
  const double amplitude = std::max(data.u0.cwiseAbs().maxCoeff(), data.u1.cwiseAbs().maxCoeff());
  const double mu_d = default_mu_d(model.grid.dimension());
  const int order = opts.functional_order;

  PicardRun run;
  Iterate prev = zero_iterate(s, dt, steps);
  for (int k = 0; k <= opts.max_iter; ++k) {
    Iterate cur;
    try {
      cur = picard_step(model, s, prev, data, q);
    } catch (const Error&) {
      run.reason = Termination::iteration_divergence;
      run.last = std::move(prev);
      return run;
    }
    run.iterations = k + 1;
    const double sup_u = (s.eigenvectors * cur.traj.cu).cwiseAbs().maxCoeff();
    run.sup_u = sup_u;
    const double Mk = functional_M(model, s, cur, mu_d, order, opts.n);
    run.M.push_back(Mk);
    if (!std::isfinite(Mk) || !std::isfinite(sup_u)) {
      run.reason = Termination::iteration_divergence;
      run.last = std::move(cur);
      return run;
    }
    if (amplitude > 0.0 && sup_u > opts.blowup_factor * amplitude) {
      run.reason = Termination::functional_blowup;
      run.last = std::move(cur);
      return run;
    }
    if (k >= 1) {
      const double A = functional_M(model, s, difference(cur, prev), mu_d, order, opts.n);
      run.A.push_back(A);
      if (A <= opts.tol * run.M.front()) {
        run.converged = true;
        run.last = std::move(cur);
        return run;
      }
      if (!std::isfinite(A) || A > 10.0 * run.M.front()) {
        run.reason = Termination::iteration_divergence;
        run.last = std::move(cur);
        return run;
      }
    }
    prev = std::move(cur);
  }
  run.reason = Termination::iteration_divergence;
  run.last = std::move(prev);
  return run;
}

LifespanRecord lifespan(const DiscreteModel& model, const SpectralData& s, const WaveData& shape,
                        double delta, const QuadraticForm& q, double T_max,
                        const NonlinearOptions& opts) {
  if (!(delta > 0.0)) throw Error("delta must be positive");
  if (!(T_max > 0.0)) throw Error("horizon must be positive");
  q.validate();
  const double base = data_norm(model, shape.u0, shape.u1, default_data_order(model.grid.dimension()));
  if (!(base > 0.0)) throw Error("data shape has zero norm");
  WaveData data{shape.label, (delta / base) * shape.u0, (delta / base) * shape.u1};

  LifespanRecord rec;
  rec.delta = delta;
  double good = 0.0;
  double T = std::min(1.0, T_max);
  Termination fail_reason = Termination::horizon_reached;
  bool failed = false;
  while (true) {
    const auto run = picard_run(model, s, data, q, T, opts);
    if (run.converged) {
      good = T;
      rec.iterations = run.iterations;
      rec.M_trace = run.M;
      rec.final_M = run.M.back();
      if (T >= T_max * (1.0 - 1e-12)) break;
      T = std::min(2.0 * T, T_max);
    } else {
      failed = true;
      fail_reason = run.reason;
      rec.iterations = run.iterations;
      rec.M_trace = run.M;
      rec.final_M = run.M.empty() ? 0.0 : run.M.back();
      break;
    }
  }
  if (!failed) {
    rec.T_obs = T_max;
    rec.reason = Termination::horizon_reached;
    rec.truncated = true;
    return rec;
  }
  double lo = good, hi = T;
  for (int r = 0; r < opts.refinements; ++r) {
    const double mid = 0.5 * (lo + hi);
    const auto run = picard_run(model, s, data, q, mid, opts);
    if (run.converged) {
      lo = mid;
    } else {
      hi = mid;
      fail_reason = run.reason;
    }
  }
  rec.T_obs = lo;
  rec.reason = fail_reason;
  return rec;
}

EstimateReport lifespan_sweep(const DiscreteModel& model, const SpectralData& s,
                              const WaveData& shape, const std::vector<double>& deltas,
                              const QuadraticForm& q, double T_max, const NonlinearOptions& opts,
                              std::vector<LifespanRecord>* records) {
  EstimateReport rep;
  rep.experiment = "lifespan-sweep";
  rep.add_param("T_max", T_max);
  rep.add_param("n", static_cast<double>(opts.n));
  rep.add_param("dt", opts.dt);
  rep.prediction = 1.0;
  if (deltas.size() < 4) throw Error("a lifespan sweep needs at least 4 delta values");
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if (!(deltas[i] < deltas[i - 1])) throw Error("delta list must be strictly descending");
  const double decades = std::log10(deltas.front() / deltas.back());
  if (decades < 1.5) rep.note("delta list spans " + format_number(decades) + " decades (< 1.5)");

  std::vector<LifespanRecord> recs(deltas.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, opts.threads));
  for (std::size_t start = 0; start < deltas.size(); start += workers) {
    std::vector<std::future<LifespanRecord>> jobs;
    const std::size_t stop = std::min(deltas.size(), start + workers);
    for (std::size_t i = start; i < stop; ++i)
      jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                [&, i] { return lifespan(model, s, shape, deltas[i], q, T_max, opts); }));
    for (std::size_t i = start; i < stop; ++i) recs[i] = jobs[i - start].get();
  }

  bool monotone = true;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (i > 0 && r.T_obs < recs[i - 1].T_obs) {
      monotone = false;
      rep.note("T_obs decreases from delta " + format_number(recs[i - 1].delta) + " to " +
               format_number(r.delta));
    }
    ReportRow row;
    row.params = {{"delta", format_number(r.delta)},
                  {"reason", to_string(r.reason)},
                  {"iterations", std::to_string(r.iterations)}};
    row.measured = r.T_obs;
    row.predicted = 1.0 / r.delta;
    row.residual = r.final_M;
    row.verdict = r.truncated ? "truncated" : "measured";
    rep.rows.push_back(row);
    if (!r.truncated && r.T_obs > 0.0) {
      xs.push_back(1.0 / r.delta);
      ys.push_back(r.T_obs);
    }
  }
  const auto truncated = recs.size() - xs.size();
  if (truncated > 0) rep.note(std::to_string(truncated) + " truncated record(s) excluded from the fit");
  rep.note("achievable T_obs is capped by the horizon " + format_number(T_max) +
           "; the fit certifies only a lower slope");
  if (xs.size() < 2) {
    rep.note(q.is_zero() ? "linear" : "all records truncated");
    rep.verdict = Verdict::inconclusive;
  } else {
    const auto fit = fit_power_law(xs, ys);
    rep.fit = fit;
    rep.plot_x = xs;
    rep.plot_y = ys;
    if (fit.r_squared < 0.85)
      rep.verdict = Verdict::inconclusive;
    else
      rep.verdict = fit.slope >= 1.0 ? Verdict::pass : Verdict::fail;
  }
  if (!monotone) rep.verdict = Verdict::fail;
  if (records != nullptr) *records = std::move(recs);
  return rep;
}

void write_lifespan_csv(std::ostream& os, const std::vector<LifespanRecord>& records) {
  os << "delta,T_obs,reason,iterations,final_M\n";
  for (const auto& r : records)
    os << format_number(r.delta) << ',' << format_number(r.T_obs) << ',' << to_string(r.reason)
       << ',' << r.iterations << ',' << format_number(r.final_M) << '\n';
}

Mat annulus_samples(const Grid& g, const std::vector<double>& radii) {
  Mat out(g.size(), static_cast<Eigen::Index>(radii.size()));
  for (std::size_t i = 0; i < radii.size(); ++i) {
    Point c = Point::Zero();
    c[0] = 0.75 * radii[i];
    out.col(static_cast<Eigen::Index>(i)) = bump(g, 0.25 * radii[i], c);
  }
  return out;
}

EstimateReport sobolev_weight_check(const DiscreteModel& model, const Mat& samples,
                                    const std::vector<double>& radii) {
  const int d = model.grid.dimension();
  const int order = (d - 1 + 1) / 2 + 1;
  EstimateReport rep;
  rep.experiment = "sobolev-check";
  rep.add_param("d", static_cast<double>(d));
  rep.add_param("order", static_cast<double>(order));
  std::vector<const SpMat*> Y;
  for (const auto& D : model.Dc) Y.push_back(&D);
  for (const auto& R : model.rot) Y.push_back(&R);
  const Vec r = model.grid.radii();
  const double hs = std::sqrt(model.grid.cell_volume());
  const bool matched = samples.cols() == static_cast<Eigen::Index>(radii.size());

  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double R = radii[k];
    if (R > model.grid.half_width()) {
      rep.note("annulus R = " + format_number(R) + " lies outside the grid; skipped");
      continue;
    }
    double worst = 0.0;
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      if (matched && j != static_cast<Eigen::Index>(k)) continue;
      const Vec h = samples.col(j);
      double lhs = 0.0;
      for (Eigen::Index i = 0; i < h.size(); ++i)
        if (r[i] >= 0.5 * R && r[i] <= R) lhs = std::max(lhs, std::abs(h[i]));
      double sum = 0.0;
      for_each_multi_index(static_cast<int>(Y.size()), order,
                           [&](const std::vector<int>& a) { sum += hs * apply_word(Y, a, h).norm(); });
      const double rhs = std::pow(R, 0.5 * (1 - d)) * sum;
      const double ratio = rhs > 0.0 ? lhs / rhs : 0.0;
      worst = std::max(worst, ratio);
      ReportRow row;
      row.params = {{"sample", std::to_string(j)}, {"R", format_number(R)}, {"lhs", format_number(lhs)}};
      row.measured = ratio;
      row.predicted = rhs;
      row.residual = lhs;
      row.verdict = "n/a";
      rep.rows.push_back(row);
    }
    xs.push_back(R);
    ys.push_back(worst);
  }
  if (xs.size() < 2 || std::all_of(ys.begin(), ys.end(), [](double v) { return v == 0.0; })) {
    rep.note("fewer than two annuli with nonzero ratio");
    rep.verdict = Verdict::inconclusive;
    return rep;
  }
  const auto fit = fit_power_law(xs, ys);
  rep.fit = fit;
  rep.plot_x = xs;
  rep.plot_y = ys;
  rep.prediction = 0.0;
  rep.verdict = fit.slope <= 0.25 ? Verdict::pass : Verdict::fail;
  return rep;
}

}  // namespace aew
