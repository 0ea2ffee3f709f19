#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mchart/config.hpp"
#include "mchart/errors.hpp"
#include "mchart/experiment.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitValidity = 3;

unsigned workers_from_env() {
  const char* v = std::getenv("MCHART_WORKERS");
  if (!v || !*v) return 0;
  try {
    return static_cast<unsigned>(std::stoul(v));
  } catch (const std::exception&) {
    std::cerr << "warning: ignoring MCHART_WORKERS='" << v << "'\n";
    return 0;
  }
}

int execute(const mchart::ExperimentConfig& config, const std::filesystem::path& out_dir) {
  const mchart::ExperimentOutcome outcome = mchart::run_experiment(config, workers_from_env());
  mchart::write_outputs(outcome, out_dir);
  std::cout << mchart::render_csv(outcome);
  std::cout << "wrote " << (out_dir / "results.csv").string() << " and "
            << (out_dir / "manifest.json").string() << "\n";
  for (const std::string& note : outcome.notes) std::cerr << "note: " << note << "\n";
  if (!outcome.valid) {
    std::cerr << "error: results flagged invalid (see manifest notes)\n";
    return kExitValidity;
  }
  return EXIT_SUCCESS;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const mchart::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mchart::CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidity;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-chart Bayesian change-point detection experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
  run->add_option("config", config_path, "Path to the key = value config")->required();
  std::string run_out;
  auto* run_out_opt = run->add_option("--out", run_out, "Output directory (overrides 'output')");

  std::string preset_name;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t runs = 0;
  auto* preset = app.add_subcommand("preset", "Run a built-in experiment");
  preset->add_option("name", preset_name, "fig4 | fig5 | example1")
      ->required()
      ->check(CLI::IsMember({"fig4", "fig5", "example1"}));
  auto* out_opt = preset->add_option("--out", out_dir, "Output directory (required unless --print-config)");
  auto* seed_opt = preset->add_option("--seed", seed, "Base seed");
  auto* runs_opt = preset->add_option("--runs", runs, "Monte Carlo runs per cell");
  bool print_only = false;
  preset->add_flag("--print-config", print_only, "Print the preset config and exit");

  auto* selftest = app.add_subcommand("selftest", "Run the differential and identity checks");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    return guarded([&] {
      std::ifstream in(config_path);
      if (!in) throw mchart::ConfigError({"cannot read config file '" + config_path + "'"});
      std::stringstream ss;
      ss << in.rdbuf();
      mchart::ExperimentConfig config = mchart::parse_config(ss.str());
      if (*run_out_opt) config.output = run_out;
      return execute(config, config.output);
    });
  }
  if (*preset) {
    return guarded([&] {
      if (print_only) {
        std::cout << mchart::preset_text(preset_name);
        return EXIT_SUCCESS;
      }
      if (!*out_opt) throw mchart::ConfigError({"preset: --out <dir> is required"});
      mchart::ExperimentConfig config = mchart::preset_config(preset_name);
      if (*seed_opt) config.seed = seed;
      if (*runs_opt) config.runs = runs;
      config.output = out_dir;
      mchart::validate_config(config);
      return execute(config, out_dir);
    });
  }
  if (*selftest) {
    return guarded([&] {
      bool ok = true;
      for (const mchart::CheckResult& r : mchart::differential_checks(mchart::selftest_config())) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "  max_error=" << r.max_error
                  << "  tolerance=" << r.tolerance << "\n";
        ok = ok && r.pass;
      }
      return ok ? EXIT_SUCCESS : kExitFailure;
    });
  }
  return EXIT_SUCCESS;
}
