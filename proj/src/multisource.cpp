#include "mchart/multisource.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mchart/errors.hpp"
#include "mchart/log_math.hpp"

namespace mchart {

namespace {

void validate_sources(const std::vector<SourceSpec>& sources) {
  if (sources.empty()) throw std::domain_error("multisource: need at least one source");
  for (const SourceSpec& s : sources) {
    if (s.grid.empty()) throw std::domain_error("multisource: empty per-source grid");
    for (std::size_t i = 1; i < s.grid.size(); ++i)
      if (!(s.grid[i] > s.grid[i - 1]))
        throw std::domain_error("multisource: per-source grid must be strictly increasing");
  }
}

std::vector<double> make_weights(std::size_t window, double slot_weight) {
  std::vector<double> w(window + 1);
  for (std::size_t j = 0; j <= window; ++j) w[j] = static_cast<double>(j + 1) * slot_weight;
  return w;
}

std::uint64_t first_start(std::uint64_t n, std::size_t window) {
  return n > window ? n - window : 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// SourceUnit

SourceUnit::SourceUnit(const SourceSpec& spec, std::size_t window)
    : kernel_(spec.family, spec.grid),
      slots_(window + 1),
      table_(kernel_.size() * slots_, 0.0),
      max_(slots_, 0.0),
      argmax_(slots_, 0),
      llr_(kernel_.size(), 0.0) {}

void SourceUnit::update(double x, std::uint64_t n) {
  kernel_.evaluate(x, llr_);
  const std::size_t fresh = slot_of(n);
  const std::size_t rows = kernel_.size();

  // Column of start k = n - window - 1 leaves; its slot becomes start k = n.
  for (std::size_t i = 0; i < rows; ++i) table_[i * slots_ + fresh] = 0.0;

  for (std::size_t i = 0; i < rows; ++i) {
    double* row = table_.data() + i * slots_;
    const double v = llr_[i];
    for (std::size_t s = 0; s < slots_; ++s) row[s] += v;
  }

  std::copy_n(table_.data(), slots_, max_.data());
  std::fill(argmax_.begin(), argmax_.end(), 0);
  for (std::size_t i = 1; i < rows; ++i) {
    const double* row = table_.data() + i * slots_;
    for (std::size_t s = 0; s < slots_; ++s) {
      if (row[s] > max_[s]) {
        max_[s] = row[s];
        argmax_[s] = i;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// WindowEngine

WindowEngine::WindowEngine(std::vector<SourceSpec> sources, const GeometricPrior& prior,
                           std::size_t window, double log_threshold)
    : window_(window),
      log_threshold_(log_threshold),
      weights_(make_weights(window, prior.slot_weight())),
      statistic_(kNegInf) {
  validate_sources(sources);
  if (std::isnan(log_threshold)) throw std::domain_error("window engine: NaN threshold");
  units_.reserve(sources.size());
  for (const SourceSpec& s : sources) units_.emplace_back(s, window);
  best_rows_.assign(units_.size(), 0);
}

std::optional<StopReport> WindowEngine::window_step(std::span<const double> x) {
  if (report_) throw StateError("window engine: already stopped");
  if (x.size() != units_.size())
    throw std::domain_error("window engine: observation vector has wrong dimension");

  const std::uint64_t n = time_ + 1;
  for (std::size_t l = 0; l < units_.size(); ++l) {
    units_[l].update(x[l], n);
    work_.table_cells += units_[l].rows() * units_[l].slots();
    work_.max_scans += units_[l].slots();
  }
  time_ = n;

  // Ties resolve to the oldest start, i.e. the lowest k.
  double best = kNegInf;
  std::uint64_t best_k = n;
  for (std::uint64_t k = first_start(n, window_); k <= n; ++k) {
    const std::size_t slot = units_.front().slot_of(k);
    double v = weights_[n - k];
    for (const SourceUnit& u : units_) v += u.max_container()[slot];
    ++work_.combines;
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  statistic_ = best;
  best_start_ = best_k;
  const std::size_t slot = units_.front().slot_of(best_k);
  for (std::size_t l = 0; l < units_.size(); ++l) best_rows_[l] = units_[l].argmax_row(slot);

  if (statistic_ >= log_threshold_) {
    report_ = StopReport{n, composite_index(best_rows_), statistic_};
    return report_;
  }
  return std::nullopt;
}

std::size_t WindowEngine::composite_index(std::span<const std::size_t> rows) const {
  std::size_t u = 0;
  std::size_t radix = 1;
  for (std::size_t l = 0; l < units_.size(); ++l) {
    u += rows[l] * radix;
    radix *= units_[l].rows();
  }
  return u;
}

// ---------------------------------------------------------------------------
// ProductSetEngine

ProductSetEngine::ProductSetEngine(std::vector<SourceSpec> sources,
                                   const GeometricPrior& prior, std::size_t window,
                                   double log_threshold)
    : composites_(1),
      window_(window),
      slots_(window + 1),
      slot_weight_(prior.slot_weight()),
      log_threshold_(log_threshold),
      statistic_(kNegInf) {
  validate_sources(sources);
  for (const SourceSpec& s : sources) {
    kernels_.emplace_back(s.family, s.grid);
    llr_.emplace_back(s.grid.size(), 0.0);
    composites_ *= s.grid.size();
  }
  sums_.assign(composites_ * slots_, 0.0);
}

std::optional<StopReport> ProductSetEngine::step(std::span<const double> x) {
  if (report_) throw StateError("product-set engine: already stopped");
  if (x.size() != kernels_.size())
    throw std::domain_error("product-set engine: observation vector has wrong dimension");
  for (std::size_t l = 0; l < kernels_.size(); ++l) kernels_[l].evaluate(x[l], llr_[l]);

  const std::uint64_t n = ++time_;
  const std::size_t fresh = n % slots_;
  const std::uint64_t k0 = first_start(n, window_);

  std::vector<std::size_t> rows(kernels_.size(), 0);
  double best = kNegInf;
  std::size_t best_u = 0;
  for (std::size_t u = 0; u < composites_; ++u) {
    double inc = 0.0;
    for (std::size_t l = 0; l < kernels_.size(); ++l) inc += llr_[l][rows[l]];

    double* cell = sums_.data() + u * slots_;
    cell[fresh] = 0.0;
    for (std::size_t s = 0; s < slots_; ++s) cell[s] += inc;
    for (std::uint64_t k = k0; k <= n; ++k) {
      const double v = static_cast<double>(n - k + 1) * slot_weight_ + cell[k % slots_];
      if (v > best) {
        best = v;
        best_u = u;
      }
    }

    for (std::size_t l = 0; l < rows.size(); ++l) {
      if (++rows[l] < llr_[l].size()) break;
      rows[l] = 0;
    }
  }
  statistic_ = best;
  if (statistic_ >= log_threshold_) {
    report_ = StopReport{n, best_u, statistic_};
    return report_;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

WindowLength window_length_for(double alpha, double d_min, double slack) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("window length: alpha must lie in (0, 1)");
  if (!(d_min > 0.0)) throw std::domain_error("window length: d_min must be positive");
  if (!(slack > 1.0)) throw std::domain_error("window length: slack must exceed 1");
  const double log_alpha = std::fabs(std::log(alpha));
  WindowLength out;
  out.length = static_cast<std::size_t>(std::ceil(slack * log_alpha / d_min));
  out.advisory = std::log(static_cast<double>(std::max<std::size_t>(out.length, 1))) >
                 0.5 * log_alpha;
  return out;
}

double composite_kl(std::span<const ObservationFamily> families,
                    std::span<const double> lam, const GeometricPrior& prior) {
  if (families.size() != lam.size())
    throw std::domain_error("composite kl: one parameter per source required");
  double total = prior.slot_weight();
  for (std::size_t l = 0; l < families.size(); ++l)
    total += kl_post_vs_pre(families[l], lam[l]);
  return total;
}

}  // namespace mchart
