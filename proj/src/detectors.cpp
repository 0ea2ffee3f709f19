#include "mchart/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mchart/errors.hpp"
#include "mchart/log_math.hpp"

namespace mchart {

const char* to_string(ChartVariant v) {
  switch (v) {
    case ChartVariant::shiryaev_roberts: return "sr";
    case ChartVariant::max_chart: return "max";
    case ChartVariant::sum_chart: return "sum";
  }
  return "?";
}

namespace {

void validate_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw std::domain_error("chart bank: empty candidate grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw std::domain_error("chart bank: candidate grid must be strictly increasing");
}

}  // namespace

ChartBank::ChartBank(const ObservationFamily& family, std::vector<double> grid,
                     const GeometricPrior& prior, ChartVariant variant,
                     std::vector<double> log_thresholds)
    : kernel_((validate_grid(grid), LlrKernel(family, grid))),
      variant_(variant),
      slot_weight_(prior.slot_weight()),
      thresholds_(std::move(log_thresholds)),
      stats_(kernel_.size(), initial_value(variant)),
      llr_(kernel_.size(), 0.0) {
  if (thresholds_.size() != kernel_.size())
    throw std::domain_error("chart bank: need one threshold per candidate");
  for (double b : thresholds_)
    if (std::isnan(b)) throw std::domain_error("chart bank: NaN threshold");
}

ChartBank::ChartBank(const ObservationFamily& family, std::vector<double> grid,
                     const GeometricPrior& prior, ChartVariant variant,
                     double log_threshold)
    : ChartBank(family, grid, prior, variant,
                std::vector<double>(grid.size(), log_threshold)) {}

double ChartBank::initial_value(ChartVariant v) {
  // R_0 = 0, C_0 = 0 (so that max(C_0, 1) = 1), S_{1:0} = 0 in log domain.
  return v == ChartVariant::sum_chart ? 0.0 : kNegInf;
}

void ChartBank::reset() {
  std::fill(stats_.begin(), stats_.end(), initial_value(variant_));
  time_ = 0;
  report_.reset();
}

std::optional<StopReport> ChartBank::step(double x) {
  if (report_) throw StateError("chart bank: already stopped");
  kernel_.evaluate(x, llr_);
  ++time_;

  const std::size_t n = stats_.size();
  // increment = |log(1-rho)| + llr, shared by all three variants so that the
  // pathwise ordering S <= log C <= log R holds exactly in floating point.
  switch (variant_) {
    case ChartVariant::shiryaev_roberts:
      for (std::size_t i = 0; i < n; ++i)
        stats_[i] = softplus(stats_[i]) + (slot_weight_ + llr_[i]);
      break;
    case ChartVariant::max_chart:
      for (std::size_t i = 0; i < n; ++i)
        stats_[i] = std::fmax(stats_[i], 0.0) + (slot_weight_ + llr_[i]);
      break;
    case ChartVariant::sum_chart:
      for (std::size_t i = 0; i < n; ++i)
        stats_[i] = stats_[i] + (slot_weight_ + llr_[i]);
      break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (stats_[i] >= thresholds_[i]) {
      report_ = StopReport{time_, i, stats_[i]};
      return report_;
    }
  }
  return std::nullopt;
}

std::optional<StopReport> ChartBank::observe(std::span<const double> x) {
  if (x.size() != 1) throw std::domain_error("chart bank: expects one observation per slot");
  return step(x[0]);
}

std::optional<StopReport> run_to_stop(ChartBank& bank, std::span<const double> path) {
  for (double x : path)
    if (auto stop = bank.step(x)) return stop;
  return std::nullopt;
}

Posterior posterior_from_stat(double log_r, double rho) {
  if (!(rho > 0.0 && rho < 1.0))
    throw std::domain_error("posterior: rho must lie in (0, 1)");
  if (std::isnan(log_r)) throw std::domain_error("posterior: NaN statistic");
  const double log_odds = std::log(rho) + log_r;
  if (log_odds == kNegInf) return {0.0, 1.0};
  if (log_odds == kPosInf) return {1.0, 0.0};
  // pi = 1 / (1 + e^{-z}), 1 - pi = 1 / (1 + e^{z}); evaluate the small side
  // through exp of a negative argument.
  Posterior p;
  if (log_odds >= 0.0) {
    const double e = std::exp(-log_odds);
    p.probability = 1.0 / (1.0 + e);
    p.complement = e / (1.0 + e);
  } else {
    const double e = std::exp(log_odds);
    p.probability = e / (1.0 + e);
    p.complement = 1.0 / (1.0 + e);
  }
  return p;
}

double stat_from_posterior(const Posterior& p, double rho) {
  if (!(rho > 0.0 && rho < 1.0))
    throw std::domain_error("posterior: rho must lie in (0, 1)");
  return std::log(p.probability) - std::log(p.complement) - std::log(rho);
}

}  // namespace mchart
