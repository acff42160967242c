#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aew/config.hpp"
#include "aew/report.hpp"

namespace aew {

/// Command-line values that take precedence over the config file.
struct RunOverrides {
  std::optional<std::string> directory;
  std::optional<bool> plot;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

void apply_overrides(ExperimentConfig& c, const RunOverrides& o);

struct RunResult {
  Verdict verdict = Verdict::inconclusive;
  int exit_code = 1;
  std::vector<EstimateReport> reports;
  std::vector<std::string> files;  ///< relative to the output directory, in write order
  double wall_seconds = 0.0;
};

/// 0 pass, 2 any fail, 3 inconclusive only.
int exit_code_for(Verdict v);

/// Runs one experiment and writes its CSVs, optional SVGs, config.ini and manifest.json.
/// Each file is written as soon as it is complete and the manifest is refreshed after
/// every file, so an interrupted run keeps what it finished. Throws Error on failure.
RunResult run_experiment(const ExperimentConfig& c);

/// load + overrides + validate + run; prints a one-line summary per report to `log`.
/// Returns the exit status, 1 on any error.
int run(const std::string& config_path, const RunOverrides& o, std::ostream& log);

std::string library_version();

}  // namespace aew
