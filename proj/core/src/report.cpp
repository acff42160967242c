#include "aew/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

namespace aew {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

PowerFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  PowerFit fit;
  fit.points = lx.size();
  if (lx.size() < 2) return fit;
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  // a perfectly flat series is a perfect fit
  fit.r_squared = syy <= 1e-300 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

PowerFit fit_power_law_upper(std::span<const double> x, std::span<const double> y) {
  double xmin = std::numeric_limits<double>::infinity();
  for (double v : x)
    if (v > 0.0) xmin = std::min(xmin, v);
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] >= 2.0 * xmin * (1.0 - 1e-12)) {
      fx.push_back(x[i]);
      fy.push_back(y[i]);
    }
  }
  return fit_power_law(fx, fy);
}

void EstimateReport::add_param(std::string key, double value) {
  parameters.emplace_back(std::move(key), format_number(value));
}

void EstimateReport::add_param(std::string key, std::string value) {
  parameters.emplace_back(std::move(key), std::move(value));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string join_params(const std::vector<std::pair<std::string, std::string>>& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ';';
    out += p[i].first + '=' + p[i].second;
  }
  return out;
}

}  // namespace

void write_csv(std::ostream& os, const EstimateReport& report) {
  os << "experiment,parameters,measured,predicted,residual,verdict\n";
  for (const auto& row : report.rows) {
    os << report.experiment << ',' << join_params(row.params) << ',' << format_number(row.measured)
       << ',' << format_number(row.predicted) << ',' << format_number(row.residual) << ','
       << row.verdict << '\n';
  }
  std::vector<std::pair<std::string, std::string>> summary = report.parameters;
  summary.emplace(summary.begin(), "row", "summary");
  const double measured = report.fit ? report.fit->slope : 0.0;
  const double residual = report.fit ? report.fit->r_squared : 0.0;
  os << report.experiment << ',' << join_params(summary) << ',' << format_number(measured) << ','
     << format_number(report.prediction) << ',' << format_number(residual) << ','
     << to_string(report.verdict) << '\n';
}

Verdict combine(std::span<const Verdict> verdicts) {
  bool any_inconclusive = false;
  for (Verdict v : verdicts) {
    if (v == Verdict::fail) return Verdict::fail;
    if (v == Verdict::inconclusive) any_inconclusive = true;
  }
  return any_inconclusive ? Verdict::inconclusive : Verdict::pass;
}

}  // namespace aew
