#include "aew/runner.hpp"

#include <spdlog/spdlog.h>

#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "aew/discretize.hpp"
#include "aew/estimates.hpp"
#include "aew/evolve.hpp"
#include "aew/linalg.hpp"
#include "aew/metric.hpp"
#include "aew/mourre.hpp"
#include "aew/nonlinear.hpp"
#include "aew/spectral.hpp"
#include "aew/svg.hpp"

#ifndef AEW_VERSION
#define AEW_VERSION "unknown"
#endif

namespace aew {

namespace {

namespace fs = std::filesystem;

struct Setup {
  std::unique_ptr<MetricField> metric;
  std::unique_ptr<DiscreteModel> model;
};

Setup build(const ExperimentConfig& c, double L) {
  Setup s;
  s.metric = std::make_unique<MetricField>(make_metric(c.family, c.d, c.rho, c.amplitude));
  s.model = std::make_unique<DiscreteModel>(assemble_operators(*s.metric, build_grid(c.d, c.N, L)));
  return s;
}

SpectralData spectrum(const ExperimentConfig& c, const DiscreteModel& model,
                      OperatorKind which = OperatorKind::P) {
  DecomposeOptions o;
  o.dense_cap = c.dense_cap;
  return decompose(model, which, c.mode, o);
}

/// Output directory, incremental file writes and the manifest.
class Session {
 public:
  explicit Session(const ExperimentConfig& c)
      : c_(c), dir_(c.directory), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
    text_file("config.ini", serialize(c));
  }

  void text_file(const std::string& name, const std::string& body) {
    {
      std::ofstream f(dir_ / name, std::ios::binary | std::ios::trunc);
      if (!f) throw Error("cannot write " + (dir_ / name).string());
      f << body;
    }
    files_.push_back(name);
    manifest("running");
  }

  void report(const std::string& stem, EstimateReport rep, const std::string& x_label,
              const std::string& y_label) {
    std::ostringstream os;
    write_csv(os, rep);
    text_file(stem + ".csv", os.str());
    if (c_.plot) {
      if (auto p = plot_for(rep, x_label, y_label)) {
        std::ostringstream svg;
        write_svg(svg, *p);
        text_file(stem + ".svg", svg.str());
      }
    }
    spdlog::info("{}: {}", stem, to_string(rep.verdict));
    reports_.push_back(std::move(rep));
  }

  RunResult finish() {
    RunResult r;
    std::vector<Verdict> vs;
    for (const auto& rep : reports_) vs.push_back(rep.verdict);
    r.verdict = combine(vs);
    r.exit_code = exit_code_for(r.verdict);
    r.wall_seconds = elapsed();
    manifest("complete", r.verdict);
    r.files = files_;
    r.reports = std::move(reports_);
    return r;
  }

  void fail(const std::string& message) {
    error_ = message;
    manifest("error");
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void manifest(const std::string& status, std::optional<Verdict> verdict = std::nullopt) {
    nlohmann::ordered_json j;
    j["experiment"] = to_string(c_.experiment);
    j["status"] = status;
    j["config_hash"] = config_hash(c_);
    j["seed"] = c_.seed;
    j["threads"] = c_.threads;
    j["versions"] = {{"aewave", library_version()},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    j["wall_time_seconds"] = elapsed();
    j["files"] = files_;
    std::vector<nlohmann::ordered_json> reps;
    for (const auto& rep : reports_)
      reps.push_back({{"experiment", rep.experiment}, {"verdict", to_string(rep.verdict)}});
    j["reports"] = reps;
    if (verdict) {
      j["verdict"] = to_string(*verdict);
      j["exit_code"] = exit_code_for(*verdict);
    }
    if (!error_.empty()) j["error"] = error_;
    std::ofstream f(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
    f << j.dump(2) << "\n";
  }

  const ExperimentConfig& c_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> files_;
  std::vector<EstimateReport> reports_;
  std::string error_;
};

ReportRow check_row(const std::string& name, double measured, double limit) {
  ReportRow r;
  r.params = {{"check", name}};
  r.measured = measured;
  r.predicted = limit;
  r.residual = measured - limit;
  r.verdict = measured <= limit ? "pass" : "fail";
  return r;
}

EstimateReport selftest(const ExperimentConfig& c, const DiscreteModel& model,
                        const SpectralData& s) {
  EstimateReport rep;
  rep.experiment = "selftest";
  rep.add_param("d", static_cast<double>(c.d));
  rep.add_param("N", static_cast<double>(c.N));
  rep.add_param("L", c.L);
  const Grid& g = model.grid;
  const double h = g.spacing();

  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    trip.emplace_back(k, k, 2.0 * c.d / (h * h));
    const auto ijk = g.multi_index(k);
    for (int a = 0; a < c.d; ++a)
      for (int step : {-1, 1}) {
        auto nb = ijk;
        nb[a] += step;
        if (nb[a] < 0 || nb[a] >= c.N) continue;
        trip.emplace_back(k, g.index(nb), -1.0 / (h * h));
      }
  }
  SpMat stencil(g.size(), g.size());
  stencil.setFromTriplets(trip.begin(), trip.end());
  const double stencil_err = SpMat(model.P0 - stencil).norm() / stencil.norm();
  rep.rows.push_back(check_row("free_stencil", stencil_err, 1e-13));
  rep.rows.push_back(check_row("symmetry_P", symmetry_residual(model.P), 1e-13));
  rep.rows.push_back(check_row("reconstruction", s.reconstruction_residual, 1e-10));
  rep.rows.push_back(check_row("orthogonality", s.orthogonality_residual, 1e-10));

  const double R = 0.25 * c.L;
  const Vec v = bump(g, R);
  const Vec exact = apply_function(s, [](double x) { return std::sqrt(std::max(x, 0.0)); }, v);
  const auto q = sqrt_quadrature(model.P, v, c.quadrature_nodes);
  rep.rows.push_back(check_row("sqrt_quadrature", (q.value - exact).norm() / exact.norm(), 1e-6));

  WaveState st{v, Vec::Zero(g.size()), 0.0, {}};
  double T = causal_window(model, R);
  if (!(T > 0.0)) T = 1.0;
  const double e0 = energy(s, st);
  const auto end = propagate_exact(s, st, T);
  rep.rows.push_back(check_row("energy_drift", std::abs(energy(s, end) - e0) / e0, 1e-10));

  const FirstOrderSystem sys(s);
  rep.rows.push_back(check_row("first_order_unitarity", sys.unitarity_residual(), 1e-10));

  const DyadicPartition part(6);
  const auto cov = part.coverage();
  double worst = 0.0;
  for (int k = 0; k <= 400; ++k) {
    const double x = cov.lo * std::pow(cov.hi / cov.lo, k / 400.0);
    worst = std::max(worst, std::abs(part.partition_sum(x) - 1.0));
  }
  rep.rows.push_back(check_row("partition_of_unity", worst, 1e-12));

  bool ok = true;
  for (const auto& r : rep.rows) ok = ok && r.verdict == "pass";
  rep.verdict = ok ? Verdict::pass : Verdict::fail;
  return rep;
}

std::vector<WaveData> pick_data(const Grid& g, double R, const std::string& which) {
  auto all = standard_data(g, R);
  if (which == "all") return all;
  for (auto& d : all)
    if (d.label == which) return {d};
  throw Error("unknown data set '" + which + "'");
}

SeparableSource make_source(const Grid& g, double R, const std::string& profile) {
  SeparableSource src;
  src.label = profile;
  src.spatial = bump(g, R);
  if (profile == "constant")
    src.profile = [](double) { return 1.0; };
  else
    src.profile = [](double t) { return std::cos(t); };
  return src;
}

KssOptions kss_options(const ExperimentConfig& c) {
  KssOptions o;
  o.dt = c.number("dt");
  o.eps = c.number("eps");
  o.slack = c.number("slack");
  o.R_data = c.number("R_data");
  if (c.has("variant")) o.sqrt_variant = c.text("variant") == "sqrt";
  return o;
}

void mourre_experiment(const ExperimentConfig& c, Session& out) {
  const auto setup = build(c, c.L);
  const auto& model = *setup.model;
  const auto s = spectrum(c, model);
  const DyadicPartition part(c.integer("partition_levels"));
  const double delta = c.number("delta");
  const double slack = c.number("slack");
  const auto w = c.list("window");
  const Interval I = w.empty() ? part.interval_above(delta) : Interval{w[0], w[1]};
  out.report("mourre-check", mourre_scan(s, model, c.list("lambdas"), I, delta, slack, part),
             "lambda", "remainder norm");

  const double lap_lambda = c.number("lap_lambda");
  if (lap_lambda > 0.0) {
    const auto A = conjugate(Regime::low, s, model, lap_lambda, part);
    bool window_ok = false;
    std::string why;
    try {
      window_ok = mourre_check(A, s, I, delta, slack).pass;
      if (!window_ok) why = "Mourre estimate fails on this window";
    } catch (const Error& e) {
      why = e.what();
    }
    const Interval J{std::sqrt(I.lo), std::sqrt(I.hi)};
    const double mu = c.number("lap_mu");
    const auto lap = lap_constant(s, A, J, mu, default_eta_grid());

    EstimateReport lr;
    lr.experiment = "limiting-absorption";
    lr.add_param("lambda", lap_lambda);
    lr.add_param("mu", mu);
    lr.add_param("J_lo", J.lo);
    lr.add_param("J_hi", J.hi);
    for (std::size_t k = 0; k < lap.eta.size(); ++k) {
      ReportRow r;
      r.params = {{"eta", format_number(lap.eta[k])}};
      r.measured = lap.max_over_re[k];
      r.predicted = k > 0 ? 2.0 * lap.max_over_re[k - 1] : 0.0;
      r.residual = k > 0 ? lap.max_over_re[k] / lap.max_over_re[k - 1] : 0.0;
      r.verdict = "n/a";
      lr.rows.push_back(r);
    }
    lr.prediction = 2.0;
    lr.note("last-two-eta ratio " + format_number(lap.last_ratio));
    lr.verdict = lap.stabilized ? Verdict::pass : Verdict::fail;
    if (!window_ok) {
      lr.note("window is not Mourre-passing: " + why);
      lr.verdict = Verdict::inconclusive;
    }
    out.report("limiting-absorption", lr, "eta", "sup norm");

    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> normal;
    Mat samples(s.size(), c.integer("lap_samples"));
    for (Eigen::Index j = 0; j < samples.cols(); ++j)
      for (Eigen::Index i = 0; i < samples.rows(); ++i) samples(i, j) = normal(rng);
    auto kato = kato_smoothness_check(s, A, J, mu, samples, c.number("kato_T"), lap.constant);
    if (!window_ok) {
      kato.note("window is not Mourre-passing: " + why);
      if (kato.verdict == Verdict::pass) kato.verdict = Verdict::inconclusive;
    }
    out.report("kato-smoothness", kato, "T", "smoothing integral");
  }

  const double weight_mu = c.number("weight_mu");
  if (weight_mu > 0.0)
    out.report("weight-bound", weight_bound_scan(s, model, c.list("lambdas"), weight_mu, part),
               "lambda", "weighted norm");
}

void kss_experiment(const ExperimentConfig& c, Session& out) {
  const auto setup = build(c, c.L);
  const auto& model = *setup.model;
  const auto s = spectrum(c, model);
  const auto opts = kss_options(c);
  const auto data = pick_data(model.grid, opts.R_data, c.text("data"));
  const auto which = c.text("source");
  std::optional<SeparableSource> src;
  if (which != "none") src = make_source(model.grid, opts.R_data, which);
  out.report("kss-scan",
             kss_scan(model, s, c.number("mu"), data, c.list("T_list"), src ? &*src : nullptr, opts),
             "T", "LHS^2");
}

void higher_experiment(const ExperimentConfig& c, Session& out) {
  const auto setup = build(c, c.L);
  const auto& model = *setup.model;
  const auto s = spectrum(c, model);
  const auto opts = kss_options(c);
  const auto data = pick_data(model.grid, opts.R_data, c.text("data"));
  out.report("kss-higher",
             kss_higher(model, s, c.number("mu"), c.integer("N_order"), data, c.list("T_list"), opts),
             "T", "LHS^2");
}

void source_experiment(const ExperimentConfig& c, Session& out) {
  const auto setup = build(c, c.L);
  const auto& model = *setup.model;
  const auto s = spectrum(c, model);
  const auto opts = kss_options(c);
  std::vector<SeparableSource> sources;
  const auto p = c.text("profile");
  if (p == "constant" || p == "both") sources.push_back(make_source(model.grid, opts.R_data, "constant"));
  if (p == "cosine" || p == "both") sources.push_back(make_source(model.grid, opts.R_data, "cosine"));
  out.report("source-scan",
             weighted_source(model, s, c.number("mu"), sources, c.list("T_list"), opts), "T",
             "LHS");
}

void resolvent_experiment(const ExperimentConfig& c, Session& out) {
  ResolventOptions o;
  o.derivative = c.flag("derivative");
  o.rel_tol = c.number("rel_tol");
  o.max_iter = c.integer("max_iter");
  o.seed = c.seed;
  const auto which = parse_operator(c.text("operator"));
  const double beta = c.number("beta"), gamma = c.number("gamma");
  const auto lambdas = c.list("lambdas");
  {
    const auto setup = build(c, c.L);
    out.report("resolvent-scan", resolvent_scan(*setup.model, which, beta, gamma, lambdas, o),
               "lambda", "norm");
  }
  const double L2 = c.number("L_check");
  if (L2 > 0.0) {
    const auto setup = build(c, L2);
    auto rep = resolvent_scan(*setup.model, which, beta, gamma, lambdas, o);
    rep.add_param("L", L2);
    out.report("resolvent-scan-L" + format_number(L2), rep, "lambda", "norm");
  }
}

void equivalence_experiment(const ExperimentConfig& c, Session& out) {
  EquivalenceOptions o;
  o.mu_lw5 = c.number("mu_lw5");
  o.mu_c16 = c.list("mu_c16");
  EquivalenceConstants base;
  {
    const auto setup = build(c, c.L);
    const auto s = spectrum(c, *setup.model);
    out.report("equivalences", norm_equivalences(*setup.model, s, o), "", "");
    base = equivalence_constants(*setup.model, s, o);
  }
  const double L2 = c.number("L_check");
  if (L2 <= 0.0) return;
  const auto setup = build(c, L2);
  const auto s = spectrum(c, *setup.model);
  const auto other = equivalence_constants(*setup.model, s, o);
  EstimateReport rep;
  rep.experiment = "equivalences-L";
  rep.add_param("L", c.L);
  rep.add_param("L_check", L2);
  std::vector<Verdict> vs;
  for (std::size_t k = 0; k < o.mu_c16.size(); ++k) {
    const double mu = o.mu_c16[k];
    ReportRow r;
    r.params = {{"mu", format_number(mu)}};
    r.measured = other.c16[k];
    r.predicted = base.c16[k];
    r.residual = other.c16[k] / base.c16[k];
    if (mu > 1.0) {
      r.verdict = r.residual < 2.0 ? "pass" : "fail";
      vs.push_back(r.residual < 2.0 ? Verdict::pass : Verdict::fail);
    } else {
      r.verdict = "outside-hypothesis";
    }
    rep.rows.push_back(r);
  }
  rep.prediction = 2.0;
  rep.verdict = vs.empty() ? Verdict::inconclusive : combine(vs);
  out.report("equivalences-L", rep, "", "");
}

void lifespan_experiment(const ExperimentConfig& c, Session& out) {
  const auto setup = build(c, c.L);
  const auto& model = *setup.model;
  const auto s = spectrum(c, model);
  NonlinearOptions o;
  o.dt = c.number("dt");
  o.max_iter = c.integer("max_iter");
  o.tol = c.number("tol");
  o.functional_order = c.integer("functional_order");
  o.n = c.integer("n");
  o.refinements = c.integer("refinements");
  o.blowup_factor = c.number("blowup_factor");
  o.threads = c.threads;
  QuadraticForm q = QuadraticForm::time_squared(c.d);
  const auto coeffs = c.list("q");
  if (!coeffs.empty()) {
    const int m = c.d + 1;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) q.q(a, b) = coeffs[static_cast<std::size_t>(a * m + b)];
  }
  q.validate();
  const auto shape = pick_data(model.grid, c.number("R_data"), c.text("shape")).front();

  const double cd = c.number("contraction_delta");
  if (cd > 0.0) {
    const double base = data_norm(model, shape.u0, shape.u1, default_data_order(c.d));
    WaveData scaled = shape;
    scaled.u0 *= cd / base;
    scaled.u1 *= cd / base;
    const double T = c.number("contraction_T");
    const auto run = picard_run(model, s, scaled, q, T, o);
    EstimateReport rep;
    rep.experiment = "contraction";
    rep.add_param("delta", cd);
    rep.add_param("T", T);
    rep.prediction = 0.5;
    bool ok = run.converged;
    for (std::size_t k = 0; k < run.A.size(); ++k) {
      ReportRow r;
      r.params = {{"k", std::to_string(k + 1)}, {"M_k", format_number(run.M[k + 1])}};
      r.measured = run.A[k];
      const bool gated = k >= 1 && run.A[k - 1] > 0.0;
      r.predicted = gated ? 0.5 * run.A[k - 1] : 0.0;
      r.residual = gated ? run.A[k] / run.A[k - 1] : 0.0;
      r.verdict = gated ? (r.residual <= 0.5 ? "pass" : "fail") : "n/a";
      ok = ok && r.verdict != "fail";
      rep.rows.push_back(r);
    }
    rep.note("termination " + to_string(run.reason) + " after " + std::to_string(run.iterations) +
             " iterations");
    rep.verdict = ok ? Verdict::pass : Verdict::fail;
    out.report("contraction", rep, "", "");
  }

  std::vector<LifespanRecord> records;
  auto sweep = lifespan_sweep(model, s, shape, c.list("deltas"), q, c.number("T_max"), o, &records);
  std::ostringstream os;
  write_lifespan_csv(os, records);
  out.text_file("lifespan.csv", os.str());
  out.report("lifespan-sweep", sweep, "1/delta", "T_obs");
}

void sobolev_experiment(const ExperimentConfig& c, Session& out) {
  const auto setup = build(c, c.L);
  const auto radii = c.list("radii");
  const Mat samples = annulus_samples(setup.model->grid, radii);
  out.report("sobolev-check", sobolev_weight_check(*setup.model, samples, radii), "R", "ratio");
}

}  // namespace

void apply_overrides(ExperimentConfig& c, const RunOverrides& o) {
  if (o.directory) c.directory = *o.directory;
  if (o.plot) c.plot = *o.plot;
  if (o.threads) c.threads = *o.threads;
  if (o.seed) c.seed = *o.seed;
}

int exit_code_for(Verdict v) {
  switch (v) {
    case Verdict::pass: return 0;
    case Verdict::fail: return 2;
    case Verdict::inconclusive: return 3;
  }
  return 1;
}

std::string library_version() { return AEW_VERSION; }

RunResult run_experiment(const ExperimentConfig& c) {
  validate(c);
  Session out(c);
  try {
    switch (c.experiment) {
      case Experiment::selftest: {
        const auto setup = build(c, c.L);
        const auto s = spectrum(c, *setup.model);
        out.report("selftest", selftest(c, *setup.model, s), "", "");
        break;
      }
      case Experiment::mourre_check: mourre_experiment(c, out); break;
      case Experiment::kss_scan: kss_experiment(c, out); break;
      case Experiment::kss_higher: higher_experiment(c, out); break;
      case Experiment::source_scan: source_experiment(c, out); break;
      case Experiment::resolvent_scan: resolvent_experiment(c, out); break;
      case Experiment::equivalences: equivalence_experiment(c, out); break;
      case Experiment::lifespan_sweep: lifespan_experiment(c, out); break;
      case Experiment::sobolev_check: sobolev_experiment(c, out); break;
    }
  } catch (const std::exception& e) {
    out.fail(e.what());
    throw;
  }
  return out.finish();
}

int run(const std::string& config_path, const RunOverrides& o, std::ostream& log) {
  try {
    auto c = load_config(config_path);
    apply_overrides(c, o);
    validate(c);
    const auto r = run_experiment(c);
    for (const auto& rep : r.reports) {
      log << rep.experiment << ": " << to_string(rep.verdict);
      if (rep.fit)
        log << " (slope " << format_number(rep.fit->slope) << ", R2 "
            << format_number(rep.fit->r_squared) << ")";
      log << "\n";
    }
    log << "verdict " << to_string(r.verdict) << ", wrote " << r.files.size() << " files to "
        << c.directory << "\n";
    return r.exit_code;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace aew
