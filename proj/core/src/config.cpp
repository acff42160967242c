#include "aew/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "aew/report.hpp"

namespace aew {

namespace {

namespace pt = boost::property_tree;

struct Named {
  Experiment e;
  const char* name;
};

constexpr Named kExperiments[] = {
    {Experiment::selftest, "selftest"},
    {Experiment::mourre_check, "mourre-check"},
    {Experiment::kss_scan, "kss-scan"},
    {Experiment::kss_higher, "kss-higher"},
    {Experiment::source_scan, "source-scan"},
    {Experiment::resolvent_scan, "resolvent-scan"},
    {Experiment::equivalences, "equivalences"},
    {Experiment::lifespan_sweep, "lifespan-sweep"},
    {Experiment::sobolev_check, "sobolev-check"},
};

std::string where(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

double to_number(const std::string& text, const std::string& ctx) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw Error(ctx + ": not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw Error(ctx + ": not a finite number: '" + text + "'");
  return v;
}

long long to_integer(const std::string& text, const std::string& ctx) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw Error(ctx + ": not an integer: '" + text + "'");
  }
  if (used != text.size()) throw Error(ctx + ": not an integer: '" + text + "'");
  return v;
}

bool to_flag(const std::string& text, const std::string& ctx) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw Error(ctx + ": expected true or false, got '" + text + "'");
}

std::vector<double> to_list(const std::string& text, const std::string& ctx) {
  std::string spaced = text;
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  std::istringstream is(spaced);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(to_number(tok, ctx));
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ' ';
    out += format_number(xs[i]);
  }
  return out;
}

std::string normalize(const KeySpec& spec, const std::string& raw, const std::string& ctx) {
  switch (spec.kind) {
    case ValueKind::number:
      return format_number(to_number(raw, ctx));
    case ValueKind::integer:
      return std::to_string(to_integer(raw, ctx));
    case ValueKind::flag:
      return to_flag(raw, ctx) ? "true" : "false";
    case ValueKind::text:
      return raw;
    case ValueKind::list:
      return join(to_list(raw, ctx));
  }
  return raw;
}

std::string spectral_mode_name(SpectralMode m) {
  return m == SpectralMode::dense_eig ? "dense_eig" : "iterative";
}

void check_keys(const pt::ptree& section, const std::string& name,
                const std::set<std::string>& allowed) {
  for (const auto& [key, child] : section) {
    if (!child.empty()) throw Error("section [" + name + "] cannot be nested");
    if (!allowed.count(key)) throw Error("unknown key " + where(name, key));
  }
}

std::string get(const pt::ptree& section, const std::string& key, const std::string& fallback) {
  const auto v = section.get_optional<std::string>(key);
  return v ? *v : fallback;
}

void require_positive_list(const ExperimentConfig& c, const std::string& key, bool ascending) {
  const auto xs = c.list(key);
  if (xs.empty()) throw Error(where("experiment", key) + ": list is empty");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0)) throw Error(where("experiment", key) + ": values must be positive");
    if (ascending && i > 0 && !(xs[i] > xs[i - 1]))
      throw Error(where("experiment", key) + ": values must be strictly ascending");
  }
}

void require_range(double v, double lo, double hi, bool lo_open, const std::string& key,
                   const std::string& what) {
  const bool ok = (lo_open ? v > lo : v >= lo) && v <= hi;
  if (!ok) throw Error(where("experiment", key) + " = " + format_number(v) + " outside " + what);
}

void require_choice(const ExperimentConfig& c, const std::string& key,
                    std::initializer_list<const char*> choices) {
  const auto v = c.text(key);
  for (const char* ch : choices)
    if (v == ch) return;
  std::string all;
  for (const char* ch : choices) all += std::string(all.empty() ? "" : ", ") + ch;
  throw Error(where("experiment", key) + " = '" + v + "': expected one of " + all);
}

}  // namespace

Experiment parse_experiment(const std::string& name) {
  for (const auto& n : kExperiments)
    if (name == n.name) return n.e;
  throw Error("unknown experiment '" + name + "'");
}

std::string to_string(Experiment e) {
  for (const auto& n : kExperiments)
    if (n.e == e) return n.name;
  return "unknown";
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& n : kExperiments) out.emplace_back(n.name);
    return out;
  }();
  return names;
}

const std::vector<KeySpec>& experiment_keys(Experiment e) {
  using K = ValueKind;
  static const std::vector<KeySpec> selftest = {};
  static const std::vector<KeySpec> mourre = {
      {"lambdas", K::list, "4 8 16 32 64"},
      {"delta", K::number, "0.5"},
      {"slack", K::number, "0.2"},
      {"window", K::list, ""},
      {"partition_levels", K::integer, "6"},
      {"lap_lambda", K::number, "0"},
      {"lap_mu", K::number, "1"},
      {"lap_samples", K::integer, "20"},
      {"kato_T", K::number, "16"},
      {"weight_mu", K::number, "0"},
  };
  static const std::vector<KeySpec> kss = {
      {"mu", K::number, "1"},
      {"eps", K::number, "0"},
      {"slack", K::number, "0.15"},
      {"T_list", K::list, "1 1.5 2 3 4 6"},
      {"R_data", K::number, "2"},
      {"dt", K::number, "0.015625"},
      {"data", K::text, "all"},
      {"source", K::text, "none"},
      {"variant", K::text, "gradient"},
  };
  static const std::vector<KeySpec> higher = {
      {"mu", K::number, "1"},
      {"eps", K::number, "0"},
      {"slack", K::number, "0.15"},
      {"N_order", K::integer, "1"},
      {"T_list", K::list, "1 1.5 2 3 4 6"},
      {"R_data", K::number, "2"},
      {"dt", K::number, "0.015625"},
      {"data", K::text, "all"},
  };
  static const std::vector<KeySpec> source = {
      {"mu", K::number, "1"},
      {"eps", K::number, "0"},
      {"slack", K::number, "0.15"},
      {"T_list", K::list, "1 1.5 2 3 4 6"},
      {"R_data", K::number, "2"},
      {"dt", K::number, "0.015625"},
      {"profile", K::text, "both"},
  };
  static const std::vector<KeySpec> resolvent = {
      {"operator", K::text, "P0"},
      {"beta", K::number, "0"},
      {"gamma", K::number, "0.75"},
      {"lambdas", K::list, "1 2 4 8 16 32 64 128 256 512 1024"},
      {"derivative", K::flag, "false"},
      {"rel_tol", K::number, "1e-08"},
      {"max_iter", K::integer, "200"},
      {"L_check", K::number, "0"},
  };
  static const std::vector<KeySpec> equiv = {
      {"mu_lw5", K::number, "1"},
      {"mu_c16", K::list, "1.5 0.5"},
      {"L_check", K::number, "0"},
  };
  static const std::vector<KeySpec> lifespan = {
      {"deltas", K::list, "0.5 0.25 0.125 0.0625"},
      {"T_max", K::number, "8"},
      {"dt", K::number, "0.03125"},
      {"max_iter", K::integer, "20"},
      {"tol", K::number, "1e-08"},
      {"functional_order", K::integer, "2"},
      {"n", K::integer, "2"},
      {"refinements", K::integer, "3"},
      {"blowup_factor", K::number, "1000"},
      {"q", K::list, ""},
      {"R_data", K::number, "2"},
      {"shape", K::text, "displacement"},
      {"contraction_delta", K::number, "0"},
      {"contraction_T", K::number, "4"},
  };
  static const std::vector<KeySpec> sobolev = {
      {"radii", K::list, "2 3 4 5 6"},
  };
  switch (e) {
    case Experiment::selftest: return selftest;
    case Experiment::mourre_check: return mourre;
    case Experiment::kss_scan: return kss;
    case Experiment::kss_higher: return higher;
    case Experiment::source_scan: return source;
    case Experiment::resolvent_scan: return resolvent;
    case Experiment::equivalences: return equiv;
    case Experiment::lifespan_sweep: return lifespan;
    case Experiment::sobolev_check: return sobolev;
  }
  return selftest;
}

double ExperimentConfig::number(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw Error("missing " + where("experiment", key));
  return to_number(it->second, where("experiment", key));
}

int ExperimentConfig::integer(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw Error("missing " + where("experiment", key));
  return static_cast<int>(to_integer(it->second, where("experiment", key)));
}

bool ExperimentConfig::flag(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw Error("missing " + where("experiment", key));
  return to_flag(it->second, where("experiment", key));
}

std::string ExperimentConfig::text(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw Error("missing " + where("experiment", key));
  return it->second;
}

std::vector<double> ExperimentConfig::list(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw Error("missing " + where("experiment", key));
  return to_list(it->second, where("experiment", key));
}

ExperimentConfig parse_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config syntax: ") + e.what());
  }
  static const std::map<std::string, std::set<std::string>> fixed = {
      {"run", {"experiment", "seed", "threads"}},
      {"metric", {"family", "d", "rho", "amplitude"}},
      {"grid", {"N", "L"}},
      {"spectral", {"mode", "dense_cap", "quadrature_nodes"}},
      {"output", {"directory", "plot"}},
  };
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty())
      throw Error("key '" + name + "' outside any section");
    if (name != "experiment" && !fixed.count(name)) throw Error("unknown section [" + name + "]");
  }
  const pt::ptree empty;
  auto section = [&](const std::string& name) -> const pt::ptree& {
    const auto it = tree.find(name);
    return it == tree.not_found() ? empty : it->second;
  };
  for (const auto& [name, keys] : fixed) check_keys(section(name), name, keys);

  ExperimentConfig c;
  const auto& run = section("run");
  const auto exp_name = run.get_optional<std::string>("experiment");
  if (!exp_name) throw Error("missing [run] experiment");
  c.experiment = parse_experiment(*exp_name);
  const auto seed = to_integer(get(run, "seed", "1"), where("run", "seed"));
  if (seed < 0) throw Error("[run] seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.threads = static_cast<int>(to_integer(get(run, "threads", "1"), where("run", "threads")));

  const auto& metric = section("metric");
  c.family = parse_family(get(metric, "family", "flat"));
  c.d = static_cast<int>(to_integer(get(metric, "d", "1"), where("metric", "d")));
  c.rho = to_number(get(metric, "rho", "2"), where("metric", "rho"));
  c.amplitude = to_number(get(metric, "amplitude", "0"), where("metric", "amplitude"));

  const auto& grid = section("grid");
  c.N = static_cast<int>(to_integer(get(grid, "N", "64"), where("grid", "N")));
  c.L = to_number(get(grid, "L", "8"), where("grid", "L"));

  const auto& spec = section("spectral");
  c.mode = parse_mode(get(spec, "mode", "dense_eig"));
  c.dense_cap = static_cast<long>(to_integer(get(spec, "dense_cap", "5000"), where("spectral", "dense_cap")));
  c.quadrature_nodes = static_cast<int>(
      to_integer(get(spec, "quadrature_nodes", "40"), where("spectral", "quadrature_nodes")));

  const auto& keys = experiment_keys(c.experiment);
  std::set<std::string> allowed;
  for (const auto& k : keys) allowed.insert(k.key);
  const auto& ex = section("experiment");
  check_keys(ex, "experiment", allowed);
  for (const auto& k : keys) {
    const auto raw = get(ex, k.key, k.fallback);
    c.params[k.key] = normalize(k, raw, where("experiment", k.key));
  }

  const auto& out = section("output");
  c.directory = get(out, "directory", "out");
  c.plot = to_flag(get(out, "plot", "false"), where("output", "plot"));

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config '" + path + "'");
  return parse_config(f);
}

std::string serialize(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[run]\n"
     << "experiment = " << to_string(c.experiment) << "\n"
     << "seed = " << c.seed << "\n"
     << "threads = " << c.threads << "\n\n"
     << "[metric]\n"
     << "family = " << to_string(c.family) << "\n"
     << "d = " << c.d << "\n"
     << "rho = " << format_number(c.rho) << "\n"
     << "amplitude = " << format_number(c.amplitude) << "\n\n"
     << "[grid]\n"
     << "N = " << c.N << "\n"
     << "L = " << format_number(c.L) << "\n\n"
     << "[spectral]\n"
     << "mode = " << spectral_mode_name(c.mode) << "\n"
     << "dense_cap = " << c.dense_cap << "\n"
     << "quadrature_nodes = " << c.quadrature_nodes << "\n\n"
     << "[experiment]\n";
  for (const auto& [k, v] : c.params) os << k << " = " << v << "\n";
  os << "\n[output]\n"
     << "directory = " << c.directory << "\n"
     << "plot = " << (c.plot ? "true" : "false") << "\n";
  return os.str();
}

void validate(const ExperimentConfig& c) {
  if (c.threads < 1) throw Error("[run] threads must be at least 1");
  if (c.d < 1 || c.d > 3) throw Error("[metric] d must be 1, 2 or 3");
  if (c.family == MetricFamily::custom)
    throw Error("[metric] family 'custom' needs a coefficient callback and is library-only");
  if (!(c.rho > 0.0)) throw Error("[metric] rho must be positive");
  if (c.amplitude < 0.0) throw Error("[metric] amplitude must be nonnegative");
  if (c.N < 3) throw Error("[grid] N must be at least 3");
  if (!(c.L > 0.0)) throw Error("[grid] L must be positive");
  if (c.dense_cap < 1) throw Error("[spectral] dense_cap must be positive");
  if (c.quadrature_nodes < 1) throw Error("[spectral] quadrature_nodes must be positive");
  const double unknowns = std::pow(static_cast<double>(c.N), c.d);
  const bool needs_dense = c.experiment != Experiment::resolvent_scan &&
                           c.experiment != Experiment::sobolev_check;
  if (needs_dense && c.mode != SpectralMode::dense_eig)
    throw Error("[spectral] mode must be dense_eig for " + to_string(c.experiment));
  if (needs_dense && unknowns > static_cast<double>(c.dense_cap))
    throw Error("[spectral] dense mode needs N^d <= dense_cap (" + format_number(unknowns) +
                " > " + std::to_string(c.dense_cap) + ")");
  if (c.directory.empty()) throw Error("[output] directory must not be empty");

  const auto positive = [&](const std::string& key) {
    if (!(c.number(key) > 0.0)) throw Error(where("experiment", key) + " must be positive");
  };
  const auto nonnegative = [&](const std::string& key) {
    if (c.number(key) < 0.0) throw Error(where("experiment", key) + " must be nonnegative");
  };

  switch (c.experiment) {
    case Experiment::selftest:
      break;
    case Experiment::mourre_check: {
      require_positive_list(c, "lambdas", true);
      require_range(c.number("delta"), 0.0, 1.0, true, "delta", "(0, 1]");
      require_range(c.number("slack"), 0.0, 1.0, false, "slack", "[0, 1]");
      const auto w = c.list("window");
      if (!w.empty() && (w.size() != 2 || !(w[0] > 0.0) || !(w[1] > w[0])))
        throw Error("[experiment] window must be two increasing positive numbers");
      if (c.integer("partition_levels") < 1) throw Error("[experiment] partition_levels must be positive");
      nonnegative("lap_lambda");
      require_range(c.number("lap_mu"), 0.0, 1.0, true, "lap_mu", "(0, 1]");
      if (c.integer("lap_samples") < 1) throw Error("[experiment] lap_samples must be positive");
      positive("kato_T");
      nonnegative("weight_mu");
      break;
    }
    case Experiment::kss_scan:
    case Experiment::kss_higher:
    case Experiment::source_scan: {
      const double mu = c.number("mu");
      if (c.experiment == Experiment::kss_higher)
        require_range(mu, 0.5, 1.0, false, "mu", "[1/2, 1]");
      else
        require_range(mu, 0.0, 1.0, true, "mu", "(0, 1]");
      nonnegative("eps");
      nonnegative("slack");
      require_positive_list(c, "T_list", true);
      positive("R_data");
      positive("dt");
      if (c.experiment == Experiment::kss_higher) {
        const int n = c.integer("N_order");
        if (n < 0 || n > 2) throw Error("[experiment] N_order must be 0, 1 or 2");
      }
      if (c.experiment == Experiment::source_scan) {
        require_choice(c, "profile", {"constant", "cosine", "both"});
      } else {
        require_choice(c, "data", {"all", "displacement", "velocity", "modulated"});
      }
      if (c.experiment == Experiment::kss_scan) {
        require_choice(c, "source", {"none", "constant", "cosine"});
        require_choice(c, "variant", {"gradient", "sqrt"});
      }
      if (c.number("R_data") >= c.L) throw Error("[experiment] R_data must be smaller than L");
      break;
    }
    case Experiment::resolvent_scan: {
      require_choice(c, "operator", {"P", "P0", "Ptilde"});
      nonnegative("beta");
      require_range(c.number("gamma"), 0.0, 1.0, false, "gamma", "[0, 1]");
      require_positive_list(c, "lambdas", true);
      positive("rel_tol");
      if (c.integer("max_iter") < 1) throw Error("[experiment] max_iter must be positive");
      nonnegative("L_check");
      break;
    }
    case Experiment::equivalences: {
      positive("mu_lw5");
      const auto m = c.list("mu_c16");
      for (double v : m)
        if (!(v > 0.0)) throw Error("[experiment] mu_c16 values must be positive");
      nonnegative("L_check");
      break;
    }
    case Experiment::lifespan_sweep: {
      const auto ds = c.list("deltas");
      if (ds.size() < 4) throw Error("[experiment] deltas needs at least 4 values");
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!(ds[i] > 0.0)) throw Error("[experiment] deltas must be positive");
        if (i > 0 && !(ds[i] < ds[i - 1])) throw Error("[experiment] deltas must be strictly descending");
      }
      positive("T_max");
      positive("dt");
      if (c.integer("max_iter") < 1) throw Error("[experiment] max_iter must be positive");
      positive("tol");
      if (c.integer("functional_order") < 0) throw Error("[experiment] functional_order must be nonnegative");
      if (c.integer("n") < 1) throw Error("[experiment] n must be positive");
      if (c.integer("refinements") < 0) throw Error("[experiment] refinements must be nonnegative");
      if (!(c.number("blowup_factor") > 1.0)) throw Error("[experiment] blowup_factor must exceed 1");
      const auto q = c.list("q");
      const auto m = static_cast<std::size_t>(c.d + 1);
      if (!q.empty()) {
        if (q.size() != m * m)
          throw Error("[experiment] q needs (1+d)^2 = " + std::to_string(m * m) + " coefficients");
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t b = 0; b < m; ++b)
            if (q[a * m + b] != q[b * m + a]) throw Error("[experiment] q must be symmetric");
      }
      positive("R_data");
      require_choice(c, "shape", {"displacement", "velocity", "modulated"});
      nonnegative("contraction_delta");
      positive("contraction_T");
      break;
    }
    case Experiment::sobolev_check:
      require_positive_list(c, "radii", true);
      if (c.list("radii").back() >= c.L) throw Error("[experiment] radii must stay below L");
      break;
  }
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : serialize(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aew
