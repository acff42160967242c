#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aew {

enum class Verdict { pass, fail, inconclusive };

std::string to_string(Verdict v);

/// Least-squares line through (log x, log y).
struct PowerFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Fits y = c x^p in log-log coordinates. Non-positive samples are skipped.
PowerFit fit_power_law(std::span<const double> x, std::span<const double> y);

/// Drops samples below 2 * min(x) (the first octave), which carries preasymptotic transients.
PowerFit fit_power_law_upper(std::span<const double> x, std::span<const double> y);

/// One CSV line: a parameter point and what was measured there.
struct ReportRow {
  std::vector<std::pair<std::string, std::string>> params;
  double measured = 0.0;
  double predicted = 0.0;
  double residual = 0.0;
  std::string verdict;  // free-form per row: "pass", "fail", "n/a", "outside-hypothesis", ...
};

/// Outcome of one measurement experiment.
struct EstimateReport {
  std::string experiment;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<ReportRow> rows;
  std::optional<PowerFit> fit;
  double prediction = 0.0;  // predicted slope or bound the verdict compares against
  Verdict verdict = Verdict::inconclusive;
  std::vector<std::string> notes;
  // series used for an optional log-log plot: x, y
  std::vector<double> plot_x;
  std::vector<double> plot_y;

  void add_param(std::string key, double value);
  void add_param(std::string key, std::string value);
  void note(std::string text) { notes.push_back(std::move(text)); }
};

/// Writes header + rows + a trailing summary row. Output is byte-stable for equal inputs.
void write_csv(std::ostream& os, const EstimateReport& report);

/// Deterministic shortest round-trip formatting for doubles.
std::string format_number(double v);

/// Combines verdicts: any fail -> fail, else any inconclusive -> inconclusive, else pass.
Verdict combine(std::span<const Verdict> verdicts);

}  // namespace aew
