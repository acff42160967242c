#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "aew/metric.hpp"
#include "aew/spectral.hpp"

namespace aew {

enum class Experiment {
  selftest,
  mourre_check,
  kss_scan,
  kss_higher,
  source_scan,
  resolvent_scan,
  equivalences,
  lifespan_sweep,
  sobolev_check
};

Experiment parse_experiment(const std::string& name);
std::string to_string(Experiment e);
const std::vector<std::string>& experiment_names();

/// INI configuration:
///
///   [run]        experiment, seed, threads
///   [metric]     family, d, rho, amplitude
///   [grid]       N, L
///   [spectral]   mode, dense_cap, quadrature_nodes
///   [experiment] keys depending on the experiment (see experiment_keys)
///   [output]     directory, plot
///
/// Unknown sections or keys are errors. Values are validated on load.
struct ExperimentConfig {
  Experiment experiment = Experiment::selftest;
  std::uint64_t seed = 1;
  int threads = 1;

  MetricFamily family = MetricFamily::flat;
  int d = 1;
  double rho = 2.0;
  double amplitude = 0.0;

  int N = 64;
  double L = 8.0;

  SpectralMode mode = SpectralMode::dense_eig;
  long dense_cap = 5000;
  int quadrature_nodes = 40;

  std::map<std::string, std::string> params;  ///< [experiment] section, raw but validated

  std::string directory = "out";
  bool plot = false;

  [[nodiscard]] bool has(const std::string& key) const { return params.count(key) > 0; }
  [[nodiscard]] double number(const std::string& key) const;
  [[nodiscard]] int integer(const std::string& key) const;
  [[nodiscard]] bool flag(const std::string& key) const;
  [[nodiscard]] std::string text(const std::string& key) const;
  [[nodiscard]] std::vector<double> list(const std::string& key) const;
};

enum class ValueKind { number, integer, flag, text, list };

struct KeySpec {
  std::string key;
  ValueKind kind;
  std::string fallback;  ///< default value as text
};

/// Keys allowed in [experiment] for one experiment, with defaults.
const std::vector<KeySpec>& experiment_keys(Experiment e);

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

/// Canonical text: fixed section order, sorted keys, normalized numbers. Round-trips exactly.
std::string serialize(const ExperimentConfig& c);

/// Range checks that depend on several fields; throws Error with the offending key.
void validate(const ExperimentConfig& c);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

}  // namespace aew
