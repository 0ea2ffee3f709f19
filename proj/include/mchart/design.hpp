#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mchart/model.hpp"

namespace mchart {

struct DesignSpec {
  ObservationFamily family;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double epsilon = 0.0;   // tolerated efficiency loss, in (0, 1)
  double rho = 0.0;
  /// K with D(f_lam, f_lam_i) <= K |lam - lam_i| on the interval. When set,
  /// the grid is built from sub-intervals of length c * epsilon / K.
  std::optional<double> lipschitz_k;
};

struct DesignOptions {
  std::size_t mesh_points = 1000;
  std::size_t max_candidates = 10000;
  MonteCarloKl kl;  // only used by generic families
};

/// Ratio of the epsilon-optimality condition at lam:
///   min_i D(f_lam, f_{lam_i}) / (D(f_lam, g) + |log(1 - rho)|).
double grid_loss_ratio(const ObservationFamily& family, std::span<const double> grid,
                       double lam, double rho, const MonteCarloKl& kl = {});

/// Largest grid_loss_ratio over a uniform mesh on [lo, hi].
double max_grid_loss_ratio(const ObservationFamily& family, std::span<const double> grid,
                           double lo, double hi, double rho, std::size_t mesh_points,
                           const MonteCarloKl& kl = {});

/// Finite increasing grid in [lambda_min, lambda_max] whose loss ratio stays
/// <= epsilon on the verification mesh. Throws CapacityError past
/// max_candidates and std::domain_error if a supplied K is too small for the
/// resulting grid to verify.
std::vector<double> design_grid(const DesignSpec& spec, const DesignOptions& options = {});

/// K = max(|hi - theta0|, |lo - theta0|, hi - lo) / sigma^2 for the
/// gaussian-mean-shift kind.
double gaussian_mean_lipschitz(const ObservationFamily& family, double lo, double hi);

/// log B = log(candidate_count) - log rho - log alpha.
double threshold_for(double alpha, double rho, std::size_t candidate_count);
/// Multi-source form, candidate count = prod_l I_l.
double threshold_for(double alpha, double rho, std::span<const std::size_t> per_source_counts);

/// Leading term |log alpha| / d_total of the ADD lower bound; the (1 + o(1))
/// factor is dropped.
double add_lower_bound(double alpha, double d_total);

/// add_lower_bound(alpha, d_total) / add_estimate. Values above 1 can only be
/// Monte Carlo noise.
double efficiency(double add_estimate, double alpha, double d_total);

/// D(f_lam, g) + |log(1 - rho)|.
double single_source_rate(const ObservationFamily& family, double lam, double rho);

/// D(f_lam, g) - min_i D(f_lam, f_{lam_i}) + |log(1 - rho)|, the rate at which
/// the best chart of a grid grows after the change.
double grid_rate(const ObservationFamily& family, std::span<const double> grid,
                 double lam, double rho);

}  // namespace mchart
