#include "aew/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace aew {
namespace {

JetPoint constant_point(const Point& x) { return {Jet(x[0]), Jet(x[1]), Jet(x[2])}; }

JetPoint variable_point(int d, const Point& x) {
  JetPoint p = constant_point(x);
  for (int k = 0; k < d; ++k) p[k] = Jet::variable(k, x[k]);
  return p;
}

Jet bracket_squared(int d, const JetPoint& x) {
  Jet s(1.0);
  for (int k = 0; k < d; ++k) s += x[k] * x[k];
  return s;
}

double radical_inverse(std::size_t n, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (n > 0) {
    r += f * static_cast<double>(n % base);
    n /= base;
    f *= inv;
  }
  return r;
}

double min_eigenvalue(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

MetricFamily parse_family(const std::string& name) {
  if (name == "flat") return MetricFamily::flat;
  if (name == "radial_bump") return MetricFamily::radial_bump;
  if (name == "anisotropic_bump") return MetricFamily::anisotropic_bump;
  if (name == "custom") return MetricFamily::custom;
  throw Error("unknown metric family '" + name + "'");
}

std::string to_string(MetricFamily f) {
  switch (f) {
    case MetricFamily::flat:
      return "flat";
    case MetricFamily::radial_bump:
      return "radial_bump";
    case MetricFamily::anisotropic_bump:
      return "anisotropic_bump";
    case MetricFamily::custom:
      return "custom";
  }
  return "custom";
}

MetricField::MetricField(int dimension, double decay_rate, MetricFamily family, double amplitude,
                         JetEntries entries)
    : d_(dimension),
      rho_(decay_rate),
      family_(family),
      amplitude_(amplitude),
      analytic_(true),
      jet_entries_(std::move(entries)) {
  if (d_ < 1 || d_ > 3) throw Error("metric dimension must be 1, 2 or 3");
  if (!(rho_ > 0.0)) throw Error("decay rate must be positive");
}

MetricField::MetricField(int dimension, double decay_rate, TabulatedEntries entries)
    : d_(dimension),
      rho_(decay_rate),
      family_(MetricFamily::custom),
      amplitude_(0.0),
      analytic_(false),
      tab_entries_(std::move(entries)) {
  if (d_ < 1 || d_ > 3) throw Error("metric dimension must be 1, 2 or 3");
  if (!(rho_ > 0.0)) throw Error("decay rate must be positive");
}

Mat MetricField::entries(const Point& x) const {
  if (family_ == MetricFamily::flat) return Mat::Identity(d_, d_);
  if (!analytic_) return tab_entries_(x);
  const JetPoint p = constant_point(x);
  Mat g(d_, d_);
  for (int i = 0; i < d_; ++i)
    for (int j = i; j < d_; ++j) g(i, j) = g(j, i) = jet_entries_(i, j, p).value();
  return g;
}

Mat MetricField::inverse(const Point& x) const {
  if (family_ == MetricFamily::flat) return Mat::Identity(d_, d_);
  Mat g = entries(x);
  Mat inv = g.ldlt().solve(Mat::Identity(d_, d_));
  return 0.5 * (inv + inv.transpose());
}

double MetricField::conformal_factor(const Point& x) const {
  if (family_ == MetricFamily::flat) return 1.0;
  const double det = entries(x).determinant();
  if (!(det > 0.0)) throw Error("metric determinant is not positive");
  return std::pow(det, 0.25);
}

double MetricField::derivative(int i, int j, const MultiIndex& alpha, const Point& x) const {
  if (order(alpha) > Jet::kMaxOrder) throw Error("derivative order above 3 is not available");
  for (int k = d_; k < 3; ++k)
    if (alpha[k] != 0) return 0.0;
  if (family_ == MetricFamily::flat) return (order(alpha) == 0 && i == j) ? 1.0 : 0.0;
  if (!analytic_) return fd_derivative(alpha, x)(i, j);
  const JetPoint p = variable_point(d_, x);
  return jet_entries_(std::min(i, j), std::max(i, j), p).derivative(alpha);
}

Mat MetricField::fd_derivative(const MultiIndex& alpha, const Point& x) const {
  const double h = 1e-4 * japanese_bracket(x);
  // tensor product of 1-d central stencils, offsets in units of h
  struct Tap {
    int offset;
    double weight;
  };
  auto stencil = [h](int a) -> std::vector<Tap> {
    switch (a) {
      case 0:
        return {{0, 1.0}};
      case 1:
        return {{1, 0.5 / h}, {-1, -0.5 / h}};
      case 2:
        return {{1, 1.0 / (h * h)}, {0, -2.0 / (h * h)}, {-1, 1.0 / (h * h)}};
      default:
        return {{2, 0.5 / (h * h * h)},
                {1, -1.0 / (h * h * h)},
                {-1, 1.0 / (h * h * h)},
                {-2, -0.5 / (h * h * h)}};
    }
  };
  const auto s0 = stencil(alpha[0]), s1 = stencil(alpha[1]), s2 = stencil(alpha[2]);
  Mat out = Mat::Zero(d_, d_);
  for (const auto& a : s0)
    for (const auto& b : s1)
      for (const auto& c : s2) {
        Point y = x + h * Point(a.offset, b.offset, c.offset);
        out += a.weight * b.weight * c.weight * tab_entries_(y);
      }
  return out;
}

std::vector<Mat> MetricField::inverse_gradient(const Point& x) const {
  std::vector<Mat> out(d_, Mat::Zero(d_, d_));
  if (family_ == MetricFamily::flat) return out;
  const Mat ginv = inverse(x);
  for (int k = 0; k < d_; ++k) {
    MultiIndex e{0, 0, 0};
    e[k] = 1;
    Mat dg(d_, d_);
    if (analytic_) {
      const JetPoint p = variable_point(d_, x);
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) dg(i, j) = dg(j, i) = jet_entries_(i, j, p).derivative(e);
    } else {
      dg = fd_derivative(e, x);
    }
    out[k] = -ginv * dg * ginv;
  }
  return out;
}

double MetricField::max_speed(const Point& x) const {
  if (family_ == MetricFamily::flat) return 1.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(inverse(x), Eigen::EigenvaluesOnly);
  return std::sqrt(es.eigenvalues()(d_ - 1));
}

std::vector<Point> probe_points(int d, std::size_t count, double half_width) {
  static constexpr int bases[3] = {2, 3, 5};
  std::vector<Point> pts;
  pts.reserve(count + 1);
  pts.push_back(Point::Zero());
  for (std::size_t n = 1; n <= count; ++n) {
    Point p = Point::Zero();
    for (int k = 0; k < d; ++k) p[k] = half_width * (2.0 * radical_inverse(n, bases[k]) - 1.0);
    pts.push_back(p);
  }
  return pts;
}

double check_positivity(const MetricField& m, double probe_half_width) {
  double worst = std::numeric_limits<double>::infinity();
  Point worst_at = Point::Zero();
  for (const Point& p : probe_points(m.dimension(), 10000, probe_half_width)) {
    const double e = min_eigenvalue(m.entries(p));
    if (!(e < worst)) continue;
    worst = e;
    worst_at = p;
  }
  if (!(worst > 0.0))
    throw Error("metric loses positive definiteness near x = (" + format_number(worst_at[0]) +
                ", " + format_number(worst_at[1]) + ", " + format_number(worst_at[2]) +
                "), smallest eigenvalue " + format_number(worst));
  return worst;
}

MetricField make_metric(MetricFamily family, int d, double rho, double amplitude,
                        double probe_half_width) {
  if (d < 1 || d > 3) throw Error("metric dimension must be 1, 2 or 3");
  JetEntries entries;
  switch (family) {
    case MetricFamily::flat:
      entries = [](int i, int j, const JetPoint&) { return Jet(i == j ? 1.0 : 0.0); };
      break;
    case MetricFamily::radial_bump:
      entries = [d, rho, amplitude](int i, int j, const JetPoint& x) {
        if (i != j) return Jet(0.0);
        return 1.0 + amplitude * pow(bracket_squared(d, x), -0.5 * rho);
      };
      break;
    case MetricFamily::anisotropic_bump:
      entries = [d, rho, amplitude](int i, int j, const JetPoint& x) {
        if (i == j) return Jet(1.0);
        return amplitude * x[i] * x[j] * pow(bracket_squared(d, x), -0.5 * rho - 1.0);
      };
      break;
    case MetricFamily::custom:
      throw Error("custom metrics are built with make_analytic_metric or make_tabulated_metric");
  }
  MetricField m(d, rho, family, family == MetricFamily::flat ? 0.0 : amplitude, std::move(entries));
  check_positivity(m, probe_half_width);
  return m;
}

MetricField make_analytic_metric(int d, double rho, JetEntries entries, double probe_half_width) {
  MetricField m(d, rho, MetricFamily::custom, 0.0, std::move(entries));
  check_positivity(m, probe_half_width);
  return m;
}

MetricField make_tabulated_metric(int d, double rho, TabulatedEntries entries,
                                  double probe_half_width) {
  MetricField m(d, rho, std::move(entries));
  check_positivity(m, probe_half_width);
  return m;
}

namespace {

std::vector<Point> probe_directions(int d) {
  std::vector<Point> dirs;
  for (int a = -1; a <= 1; ++a)
    for (int b = (d >= 2 ? -1 : 0); b <= (d >= 2 ? 1 : 0); ++b)
      for (int c = (d >= 3 ? -1 : 0); c <= (d >= 3 ? 1 : 0); ++c) {
        Point p(a, b, c);
        if (p.squaredNorm() > 0) dirs.push_back(p.normalized());
      }
  if (d >= 2) {
    Point generic(0.6, 0.8 * (d == 3 ? 0.28 : 1.0), d == 3 ? 0.8 * 0.96 : 0.0);
    dirs.push_back(generic.normalized());
  }
  return dirs;
}

}  // namespace

EstimateReport decay_check(const MetricField& m, const std::vector<double>& probe_radii,
                           int alpha_max, std::optional<double> rate) {
  if (alpha_max > Jet::kMaxOrder) throw Error("alpha_max exceeds the derivative oracle order");
  const double r = rate.value_or(m.decay_rate());
  const int d = m.dimension();
  EstimateReport rep;
  rep.experiment = "decay-check";
  rep.add_param("family", to_string(m.family()));
  rep.add_param("rate", r);
  rep.add_param("alpha_max", static_cast<double>(alpha_max));
  rep.prediction = 0.25;
  if (!m.analytic_derivatives()) rep.note("derivatives by central finite differences");

  std::vector<double> radii = probe_radii;
  std::sort(radii.begin(), radii.end());
  const auto dirs = probe_directions(d);
  std::vector<std::vector<double>> sups(alpha_max + 1, std::vector<double>(radii.size(), 0.0));

  for (std::size_t ri = 0; ri < radii.size(); ++ri) {
    for (const Point& dir : dirs) {
      const Point x = radii[ri] * dir;
      const double br = japanese_bracket(x);
      for (const MultiIndex& a : multi_indices(d, alpha_max)) {
        const int k = order(a);
        const double scale = std::pow(br, k + r);
        for (int i = 0; i < d; ++i)
          for (int j = i; j < d; ++j) {
            double v = m.derivative(i, j, a, x);
            if (k == 0 && i == j) v -= 1.0;
            sups[k][ri] = std::max(sups[k][ri], std::abs(v) * scale);
          }
      }
    }
  }

  double worst_slope = -std::numeric_limits<double>::infinity();
  const std::size_t half = radii.size() / 2;
  for (int k = 0; k <= alpha_max; ++k) {
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
      ReportRow row;
      row.params = {{"radius", format_number(radii[ri])}, {"order", std::to_string(k)}};
      row.measured = sups[k][ri];
      row.verdict = "n/a";
      rep.rows.push_back(row);
    }
    std::vector<double> xs, ys;
    for (std::size_t ri = half; ri < radii.size(); ++ri) {
      xs.push_back(std::sqrt(1.0 + radii[ri] * radii[ri]));
      ys.push_back(sups[k][ri]);
    }
    const PowerFit fit = fit_power_law(xs, ys);
    const double slope = fit.points >= 2 ? fit.slope : 0.0;
    if (slope > worst_slope) {
      worst_slope = slope;
      rep.fit = fit;
      rep.fit->slope = slope;
    }
  }
  rep.verdict = worst_slope <= 0.25 ? Verdict::pass : Verdict::fail;
  rep.note(rep.verdict == Verdict::pass ? "consistent" : "inconsistent");
  return rep;
}

namespace {

struct RayRhs {
  const MetricField& m;
  int d;
  Eigen::VectorXd operator()(const Eigen::VectorXd& y) const {
    Point x = Point::Zero();
    Vec xi(d);
    for (int k = 0; k < d; ++k) {
      x[k] = y[k];
      xi[k] = y[d + k];
    }
    Eigen::VectorXd dy(2 * d);
    dy.head(d) = m.inverse(x) * xi;
    const auto grad = m.inverse_gradient(x);
    for (int k = 0; k < d; ++k) dy[d + k] = -0.5 * xi.dot(grad[k] * xi);
    return dy;
  }
};

double hamiltonian(const MetricField& m, const Eigen::VectorXd& y, int d) {
  Point x = Point::Zero();
  for (int k = 0; k < d; ++k) x[k] = y[k];
  const Vec xi = y.tail(d);
  return xi.dot(m.inverse(x) * xi);
}

Point unit_direction(int d, int index, int count, double offset) {
  if (d == 1) return Point(index % 2 == 0 ? 1.0 : -1.0, 0, 0);
  if (d == 2) {
    const double th = 2.0 * std::numbers::pi * (index + offset) / count;
    return Point(std::cos(th), std::sin(th), 0);
  }
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - 2.0 * (index + 0.5) / count;
  const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double th = golden * index + 2.0 * std::numbers::pi * offset;
  return Point(rr * std::cos(th), rr * std::sin(th), z);
}

}  // namespace

EstimateReport geodesic_escape(const MetricField& m, int n_rays, double T_max, double R_escape,
                               const GeodesicOptions& opts) {
  const int d = m.dimension();
  EstimateReport rep;
  rep.experiment = "geodesic-escape";
  rep.add_param("family", to_string(m.family()));
  rep.add_param("rays", static_cast<double>(n_rays));
  rep.add_param("T_max", T_max);
  rep.add_param("R_escape", R_escape);
  rep.prediction = T_max;

  // Dormand-Prince 5(4) tableau; the flow is autonomous so the nodes c_i are not needed
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const RayRhs f{m, d};
  double slowest = 0.0, worst_drift = 0.0;
  int escaped = 0, failed = 0;
  for (int ray = 0; ray < n_rays; ++ray) {
    const Point pos_dir = unit_direction(d, ray, n_rays, 0.37);
    const double frac = d == 1 ? radical_inverse(ray + 1, 2)
                               : std::pow(radical_inverse(ray + 1, 2), 1.0 / d);
    const Point x0 = opts.seed_radius * frac * pos_dir;
    const Point p_dir = unit_direction(d, (ray * 7 + 3) % std::max(n_rays, 1), n_rays, 0.11);
    Eigen::VectorXd y(2 * d);
    for (int k = 0; k < d; ++k) {
      y[k] = x0[k];
      y[d + k] = p_dir[k];
    }
    y.tail(d) /= std::sqrt(hamiltonian(m, y, d));
    const double h0 = hamiltonian(m, y, d);

    double t = 0.0, dt = 1e-2;
    bool out = false, step_failure = false;
    Eigen::VectorXd k1 = f(y);
    for (int step = 0; step < opts.max_steps && t < T_max; ++step) {
      dt = std::min(dt, T_max - t);
      const Eigen::VectorXd k2 = f(y + dt * a21 * k1);
      const Eigen::VectorXd k3 = f(y + dt * (a31 * k1 + a32 * k2));
      const Eigen::VectorXd k4 = f(y + dt * (a41 * k1 + a42 * k2 + a43 * k3));
      const Eigen::VectorXd k5 = f(y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Eigen::VectorXd k6 =
          f(y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Eigen::VectorXd yn = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Eigen::VectorXd k7 = f(yn);
      const Eigen::VectorXd err =
          dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double en = 0.0;
      for (int i = 0; i < 2 * d; ++i) {
        const double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(yn[i]));
        en = std::max(en, std::abs(err[i]) / sc);
      }
      if (!std::isfinite(en)) {
        step_failure = true;
        break;
      }
      if (en <= 1.0) {
        if (yn.head(d).norm() > R_escape) {
          // cubic Hermite on the accepted step, bisected for the crossing |x| = R
          auto radius = [&](double s) {
            const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
            const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
            return (h00 * y.head(d) + h10 * dt * k1.head(d) + h01 * yn.head(d) +
                    h11 * dt * k7.head(d))
                .norm();
          };
          double lo = 0.0, hi = 1.0;
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (radius(mid) > R_escape ? hi : lo) = mid;
          }
          t += hi * dt;
          y = yn;
          out = true;
          break;
        }
        t += dt;
        y = yn;
        k1 = k7;
      }
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      dt *= fac;
      dt = std::min(dt, 0.5 * R_escape);
      if (dt < 1e-14) {
        step_failure = true;
        break;
      }
    }
    const double drift = std::abs(hamiltonian(m, y, d) - h0) / h0;
    worst_drift = std::max(worst_drift, drift);
    ReportRow row;
    row.params = {{"ray", std::to_string(ray)}};
    row.measured = t;
    row.predicted = R_escape;
    row.residual = drift;
    if (step_failure) {
      ++failed;
      row.verdict = "step-failure";
    } else if (out) {
      ++escaped;
      slowest = std::max(slowest, t);
      row.verdict = "escaped";
    } else {
      row.verdict = "trapped";
    }
    rep.rows.push_back(row);
  }
  rep.add_param("slowest_escape", slowest);
  rep.add_param("max_p0_drift", worst_drift);
  if (failed > 0) rep.note(std::to_string(failed) + " rays hit integrator step failure");
  rep.verdict = escaped == n_rays ? Verdict::pass : Verdict::fail;
  rep.note(rep.verdict == Verdict::pass ? "escaped" : "possibly trapping");
  return rep;
}

}  // namespace aew
