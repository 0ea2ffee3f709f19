#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mchart/detectors.hpp"
#include "mchart/model.hpp"

namespace mchart {

/// One monitored source: its family and the finite candidate set searched.
struct SourceSpec {
  ObservationFamily family;
  std::vector<double> grid;
};

/// Per-source storage of the windowed engine.
///
/// Logical layout: the LLR table has one row per candidate and one column per
/// start time k in [n - window, n]; cell (i, k) holds sum_{q=k..n} llr_i(x_q).
/// Physically the columns live in a ring of window + 1 slots, slot(k) = k mod
/// (window + 1); the column that leaves the window is reused for the new start.
class SourceUnit {
 public:
  SourceUnit(const SourceSpec& spec, std::size_t window);

  /// Advances to time n (the caller's clock, n >= 1) with observation x.
  void update(double x, std::uint64_t n);

  std::size_t rows() const noexcept { return kernel_.size(); }
  std::size_t slots() const noexcept { return slots_; }
  std::size_t slot_of(std::uint64_t k) const noexcept { return k % slots_; }

  double cell(std::size_t row, std::size_t slot) const { return table_[row * slots_ + slot]; }
  std::span<const double> max_container() const noexcept { return max_; }
  std::size_t argmax_row(std::size_t slot) const { return argmax_[slot]; }
  const std::vector<double>& grid() const noexcept { return kernel_.grid(); }

 private:
  LlrKernel kernel_;
  std::size_t slots_;
  std::vector<double> table_;   // rows x slots, row-major
  std::vector<double> max_;
  std::vector<std::size_t> argmax_;
  std::vector<double> llr_;
};

/// Counts of elementary operations performed so far; used to check the
/// O(window * sum_l I_l) per-step cost.
struct WorkCounters {
  std::uint64_t table_cells = 0;
  std::uint64_t max_scans = 0;
  std::uint64_t combines = 0;
};

/// Window-based modified M-SR engine for L independent sources that change
/// simultaneously. The statistic at time n is
///   max_{k in [max(1, n-window), n]} (n-k+1)|log(1-rho)| + sum_l maxrow_l(k),
/// which equals the maximum over the full product candidate set.
class WindowEngine final : public Detector {
 public:
  WindowEngine(std::vector<SourceSpec> sources, const GeometricPrior& prior,
               std::size_t window, double log_threshold);

  std::optional<StopReport> window_step(std::span<const double> x);

  std::size_t dimension() const override { return units_.size(); }
  std::optional<StopReport> observe(std::span<const double> x) override {
    return window_step(x);
  }

  double statistic() const noexcept { return statistic_; }
  std::uint64_t time() const noexcept { return time_; }
  std::size_t window() const noexcept { return window_; }
  double log_threshold() const noexcept { return log_threshold_; }
  bool stopped() const noexcept { return report_.has_value(); }
  const std::optional<StopReport>& report() const noexcept { return report_; }
  const std::vector<SourceUnit>& units() const noexcept { return units_; }
  const std::vector<double>& fixed_weights() const noexcept { return weights_; }
  const WorkCounters& work() const noexcept { return work_; }

  /// Start time k and per-source rows attaining the current statistic.
  std::uint64_t best_start() const noexcept { return best_start_; }
  const std::vector<std::size_t>& best_rows() const noexcept { return best_rows_; }

  /// Mixed-radix composite index u = sum_l rows[l] * prod_{l' < l} I_{l'}.
  std::size_t composite_index(std::span<const std::size_t> rows) const;

 private:
  std::vector<SourceUnit> units_;
  std::size_t window_;
  double log_threshold_;
  std::vector<double> weights_;  // weights_[n-k] = (n-k+1)|log(1-rho)|
  double statistic_;
  std::uint64_t time_ = 0;
  std::uint64_t best_start_ = 0;
  std::vector<std::size_t> best_rows_;
  std::optional<StopReport> report_;
  WorkCounters work_;
};

/// The direct alternative: one windowed max-chart per composite candidate,
/// prod_l I_l of them. Same statistic as WindowEngine at exponential cost in L.
class ProductSetEngine final : public Detector {
 public:
  ProductSetEngine(std::vector<SourceSpec> sources, const GeometricPrior& prior,
                   std::size_t window, double log_threshold);

  std::optional<StopReport> step(std::span<const double> x);

  std::size_t dimension() const override { return kernels_.size(); }
  std::optional<StopReport> observe(std::span<const double> x) override { return step(x); }

  double statistic() const noexcept { return statistic_; }
  std::size_t composite_count() const noexcept { return composites_; }

 private:
  std::vector<LlrKernel> kernels_;
  std::vector<std::vector<double>> llr_;
  std::size_t composites_;
  std::size_t window_;
  std::size_t slots_;
  double slot_weight_;
  double log_threshold_;
  std::vector<double> sums_;  // composites x slots
  double statistic_;
  std::uint64_t time_ = 0;
  std::optional<StopReport> report_;
};

struct WindowLength {
  std::size_t length = 0;
  /// Set when log(length) is not small against |log alpha| (ratio > 1/2), i.e.
  /// the window may be too long for the asymptotic regime at this alpha.
  bool advisory = false;
};

/// ceil(slack * |log alpha| / d_min).
WindowLength window_length_for(double alpha, double d_min, double slack);

/// sum_l D(f_{lam_l}, g_{theta_l0}) + |log(1 - rho)|.
double composite_kl(std::span<const ObservationFamily> families,
                    std::span<const double> lam, const GeometricPrior& prior);

}  // namespace mchart
