#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mchart/detectors.hpp"
#include "mchart/model.hpp"
#include "mchart/multisource.hpp"

namespace mchart {

/// Where the simulated observations come from: one family per source, the
/// true post-change parameter of each, and the change-point prior.
struct Scenario {
  std::vector<ObservationFamily> sources;
  std::vector<double> lam_true;
  GeometricPrior prior;
};

Scenario single_source(const ObservationFamily& family, double lam_true,
                       const GeometricPrior& prior);

using DetectorFactory = std::function<std::unique_ptr<Detector>()>;

struct RunRecord {
  std::uint64_t change_point = 0;
  std::optional<std::uint64_t> stop_time;    // empty when censored
  std::optional<std::size_t> firing_chart;
  bool false_alarm = false;                  // stop_time < change_point
  /// (tau - t)^+. For a run censored after the change this is
  /// horizon - t + 1, a lower bound on the true delay.
  std::uint64_t delay = 0;

  bool censored() const noexcept { return !stop_time.has_value(); }
};

struct EstimateOptions {
  std::size_t n_runs = 10000;
  std::size_t horizon = 1000;
  std::uint64_t seed = 1;
  double censor_cap = 1e-3;   // max censored fraction for a valid summary
  unsigned workers = 0;       // 0: hardware concurrency
};

struct McSummary {
  std::size_t n_runs = 0;
  double add_hat = 0.0;       // mean of (tau - t)^+ over all runs
  double pfa_hat = 0.0;
  double se_add = 0.0;
  double se_pfa = 0.0;
  std::size_t false_alarms = 0;
  std::size_t censored_count = 0;
  bool valid = true;          // censored fraction <= censor_cap
};

/// One run: draws t and the path from seeds derived from (seed, run), feeds a
/// fresh detector until it stops or the horizon is reached.
RunRecord simulate_run(const DetectorFactory& factory, const Scenario& scenario,
                       std::size_t horizon, std::uint64_t seed, std::uint64_t run);

/// All runs, in run order. Runs are spread across workers; the result does
/// not depend on the worker count.
std::vector<RunRecord> simulate_runs(const DetectorFactory& factory, const Scenario& scenario,
                                     const EstimateOptions& options);

McSummary summarize(std::span<const RunRecord> runs, double censor_cap);

McSummary estimate(const DetectorFactory& factory, const Scenario& scenario,
                   const EstimateOptions& options);

/// Default horizon: ceil(8 |log alpha| / d_min) plus enough slots that the
/// change point exceeds it with probability below censor_cap / 10.
std::size_t default_horizon(double alpha, double d_min, const GeometricPrior& prior,
                            double censor_cap = 1e-3);

// ---------------------------------------------------------------------------
// Direct evaluation of the statistics from their defining sums and maxima.

inline constexpr std::size_t kOracleMaxLength = 500;

/// trace[n-1][i]: statistic of candidate i after n observations, evaluated by
/// definition over all start times k = 1..n (sum_chart: k = 1 only).
std::vector<std::vector<double>> direct_stat_trace(ChartVariant variant,
                                                   std::span<const double> path,
                                                   const ObservationFamily& family,
                                                   std::span<const double> grid, double rho,
                                                   std::size_t cap = kOracleMaxLength);

/// trace[n-1]: windowed multi-source statistic maximized by exhaustive search
/// over the product candidate set. paths[l] is the observation path of source l.
std::vector<double> direct_window_trace(const std::vector<SourceSpec>& sources,
                                        const std::vector<std::vector<double>>& paths,
                                        double rho, std::size_t window,
                                        std::size_t cap = kOracleMaxLength);

// ---------------------------------------------------------------------------
// Sweeps over alpha.

struct SweepSpec {
  std::string detector_name;
  /// Builds a detector factory for a given log threshold.
  std::function<DetectorFactory(double log_threshold)> make;
  /// Candidate counts per source; the threshold uses their product.
  std::vector<std::size_t> candidate_counts;
  Scenario scenario;
  /// d used in the lower bound |log alpha| / d.
  double d_total = 0.0;
  /// Rate used to size the default horizon (the slowest expected growth).
  double d_horizon = 0.0;
  std::size_t n_runs = 10000;
  std::optional<std::size_t> horizon;   // empty: default_horizon per alpha
  std::uint64_t seed = 1;
  double censor_cap = 1e-3;
  unsigned workers = 0;
};

struct SweepRow {
  double alpha = 0.0;
  double log_alpha_abs = 0.0;
  std::string detector;
  std::vector<double> lambda_true;
  McSummary summary;
  double lower_bound = 0.0;
  double efficiency = 0.0;   // NaN when add_hat is 0
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
};

/// One estimate per alpha (strictly decreasing), all sharing the same seed so
/// that rows and detectors are paired path by path.
std::vector<SweepRow> add_vs_alpha_sweep(const SweepSpec& spec, std::span<const double> alphas);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y ~ a + b x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace mchart
