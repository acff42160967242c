#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "aew/config.hpp"
#include "aew/runner.hpp"

namespace {

// OpenBLAS picks its kernels when the library loads, so the core type has to be in the
// environment before main runs. Re-exec once with it set unless the caller chose one.
void pin_blas_core(char** argv) {
  if (std::getenv("OPENBLAS_CORETYPE") || std::getenv("AEW_NO_REEXEC")) return;
  setenv("OPENBLAS_CORETYPE", "Haswell", 1);
  setenv("AEW_NO_REEXEC", "1", 1);
  execv("/proc/self/exe", argv);
}

}  // namespace

int main(int argc, char** argv) {
  pin_blas_core(argv);

  CLI::App app{"Asymptotically Euclidean wave experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", aew::library_version());

  std::string config_path;
  aew::RunOverrides over;
  std::string out_dir;
  bool plot = false;
  int threads = 0;
  std::uint64_t seed = 0;
  bool dump = false;

  for (const auto& name : aew::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides [output] directory)");
    sub->add_flag("--plot", plot, "write SVG log-log plots");
    sub->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "random seed");
    sub->add_flag("--print-config", dump, "print the canonical configuration and exit");
  }

  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  const std::string experiment = sub->get_name();
  try {
    aew::ExperimentConfig c;
    if (config_path.empty()) {
      std::istringstream is("[run]\nexperiment = " + experiment + "\n");
      c = aew::parse_config(is);
    } else {
      c = aew::load_config(config_path);
      if (aew::to_string(c.experiment) != experiment)
        throw aew::Error("config is for '" + aew::to_string(c.experiment) + "', not '" +
                         experiment + "'");
    }
    if (!out_dir.empty()) over.directory = out_dir;
    if (plot) over.plot = true;
    if (sub->count("--threads")) over.threads = threads;
    if (sub->count("--seed")) over.seed = seed;
    aew::apply_overrides(c, over);
    aew::validate(c);
    if (dump) {
      std::cout << aew::serialize(c);
      return 0;
    }
    const auto r = aew::run_experiment(c);
    for (const auto& rep : r.reports) {
      std::cout << rep.experiment << ": " << aew::to_string(rep.verdict);
      if (rep.fit)
        std::cout << " (slope " << aew::format_number(rep.fit->slope) << ", R2 "
                  << aew::format_number(rep.fit->r_squared) << ")";
      std::cout << "\n";
    }
    std::cout << "verdict " << aew::to_string(r.verdict) << "; " << r.files.size()
              << " files in " << c.directory << "\n";
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
