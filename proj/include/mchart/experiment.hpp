#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mchart/config.hpp"
#include "mchart/simulator.hpp"

namespace mchart {

inline constexpr const char* kVersion = "1.0.0";

/// Fixed CSV column order of sweep outputs.
inline constexpr const char* kSweepCsvHeader =
    "alpha,log_alpha_abs,detector,lambda_true,add_hat,add_se,pfa_hat,pfa_se,"
    "lower_bound,efficiency,censored,n_runs,seed";

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ExperimentOutcome {
  ExperimentConfig config;
  nlohmann::json resolved;          // config plus derived values (grid, window, ...)
  std::string manifest_hash;
  std::vector<SweepRow> rows;
  std::vector<CheckResult> checks;  // differential-test only
  bool valid = true;
  std::vector<std::string> notes;   // validity and advisory messages
};

/// Executes the experiment. workers = 0 uses the hardware concurrency; the
/// results do not depend on it.
ExperimentOutcome run_experiment(const ExperimentConfig& config, unsigned workers = 0);

/// CSV text: "# manifest_hash=<hex>" line, header, one line per row.
std::string render_csv(const ExperimentOutcome& outcome);
nlohmann::json render_manifest(const ExperimentOutcome& outcome);

/// Writes results.csv and manifest.json under dir (created if missing).
void write_outputs(const ExperimentOutcome& outcome, const std::filesystem::path& dir);

/// SHA-256 hex digest of the canonical manifest core (tool, version,
/// resolved config).
std::string manifest_hash(const nlohmann::json& resolved);

/// Recursion-vs-definition and decomposition-vs-exhaustive checks on random
/// paths; the body of the selftest command and the differential-test kind.
std::vector<CheckResult> differential_checks(const ExperimentConfig& config);

/// Default differential suite used by `selftest`.
ExperimentConfig selftest_config();

}  // namespace mchart
