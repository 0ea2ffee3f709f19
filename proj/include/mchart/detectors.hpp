#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mchart/model.hpp"

namespace mchart {

/// Which per-candidate statistic a ChartBank tracks.
///
/// shiryaev_roberts: log R_n, sum over start times (M-SR).
/// max_chart:        log C_n, max over start times (modified M-SR).
/// sum_chart:        S_{1:n}, start time pinned at 1.
enum class ChartVariant { shiryaev_roberts, max_chart, sum_chart };

const char* to_string(ChartVariant v);

struct StopReport {
  std::uint64_t stopped_at = 0;   // n >= 1
  std::size_t firing_chart = 0;   // lowest index among charts at/above threshold
  double firing_value = 0.0;      // log statistic of that chart at stopped_at
};

/// Online detector over one observation vector per slot.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::size_t dimension() const = 0;
  /// Consumes x_n; returns the stop report the first time a chart crosses.
  virtual std::optional<StopReport> observe(std::span<const double> x) = 0;
};

/// Bank of per-candidate charts for one sequence, all in log domain.
/// Stops at the first n where some chart satisfies stat_i >= log B_i.
class ChartBank final : public Detector {
 public:
  ChartBank(const ObservationFamily& family, std::vector<double> grid,
            const GeometricPrior& prior, ChartVariant variant,
            std::vector<double> log_thresholds);
  /// Common threshold for all charts.
  ChartBank(const ObservationFamily& family, std::vector<double> grid,
            const GeometricPrior& prior, ChartVariant variant, double log_threshold);

  std::optional<StopReport> step(double x);

  std::size_t dimension() const override { return 1; }
  std::optional<StopReport> observe(std::span<const double> x) override;

  /// Back to n = 0.
  void reset();

  ChartVariant variant() const noexcept { return variant_; }
  const std::vector<double>& grid() const noexcept { return kernel_.grid(); }
  const std::vector<double>& log_stats() const noexcept { return stats_; }
  const std::vector<double>& log_thresholds() const noexcept { return thresholds_; }
  std::uint64_t time() const noexcept { return time_; }
  bool stopped() const noexcept { return report_.has_value(); }
  const std::optional<StopReport>& report() const noexcept { return report_; }

 private:
  static double initial_value(ChartVariant v);

  LlrKernel kernel_;
  ChartVariant variant_;
  double slot_weight_;
  std::vector<double> thresholds_;
  std::vector<double> stats_;
  std::vector<double> llr_;
  std::uint64_t time_ = 0;
  std::optional<StopReport> report_;
};

/// Steps the bank through path until it stops; nullopt means the path ran out
/// first (censored).
std::optional<StopReport> run_to_stop(ChartBank& bank, std::span<const double> path);

/// Posterior P(t <= n | F_n) for the chart behind log_r, held together with its
/// complement so that both tails keep full relative precision.
struct Posterior {
  double probability = 0.0;
  double complement = 1.0;
};

/// Solves log(pi / (1 - pi)) = log rho + log R_n.
Posterior posterior_from_stat(double log_r, double rho);

/// Inverse of posterior_from_stat.
double stat_from_posterior(const Posterior& p, double rho);

}  // namespace mchart
