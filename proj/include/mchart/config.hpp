#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mchart {

enum class ExperimentKind { single_sweep, epsilon_design, multisource_sweep, differential_test };

const char* to_string(ExperimentKind k);

/// Raised for unreadable or invalid configurations. what() lists every
/// problem found, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Flat key = value experiment description. See README for the key list.
struct ExperimentConfig {
  std::string name = "custom";
  ExperimentKind kind = ExperimentKind::single_sweep;

  std::string family = "gaussian-mean";   // gaussian-mean | gaussian-variance
  double family_pre = 0.0;                // theta0 (mean, or sd for gaussian-variance)
  double family_nuisance = 1.0;           // sigma, or the fixed mean for gaussian-variance
  std::optional<std::pair<double, double>> lambda_interval;

  double rho = 0.01;
  std::vector<std::vector<double>> grids;   // candidate grids, or per-source grids
  std::vector<std::string> detectors = {"msr", "mmsr"};
  std::vector<double> lambda_true;
  std::vector<double> alphas;
  std::size_t runs = 10000;
  std::optional<std::size_t> horizon;       // slots; empty means auto
  std::optional<std::size_t> window;        // slots; empty means derived from window_slack
  double window_slack = 1.5;
  double epsilon = 0.2;
  std::size_t mesh = 1000;
  std::string lipschitz = "none";           // none | auto | <K>
  std::size_t paths = 100;
  std::size_t path_length = 200;
  std::uint64_t seed = 1;
  double censor_cap = 1e-3;
  std::string output = "out";
};

/// Parses and validates a configuration; throws ConfigError listing all
/// problems at once.
ExperimentConfig parse_config(std::string_view text);

/// Re-runs the semantic validation on an already-built config (e.g. after
/// command-line overrides).
void validate_config(const ExperimentConfig& config);

/// Built-in configurations: "fig4", "fig5", "example1".
ExperimentConfig preset_config(std::string_view name);
std::string preset_text(std::string_view name);

nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace mchart
