#include "mchart/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mchart/errors.hpp"

namespace mchart {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

std::vector<double> uniform_mesh(double lo, double hi, std::size_t points) {
  require(points >= 2, "design: verification mesh needs at least two points");
  std::vector<double> mesh(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t j = 0; j < points; ++j) mesh[j] = lo + step * static_cast<double>(j);
  mesh.back() = hi;
  return mesh;
}

}  // namespace

double single_source_rate(const ObservationFamily& family, double lam, double rho) {
  return kl_post_vs_pre(family, lam) + GeometricPrior(rho).slot_weight();
}

double grid_rate(const ObservationFamily& family, std::span<const double> grid,
                 double lam, double rho) {
  require(!grid.empty(), "grid rate: empty grid");
  double closest = std::numeric_limits<double>::infinity();
  for (double c : grid) closest = std::min(closest, kl_post_vs_post(family, lam, c));
  return single_source_rate(family, lam, rho) - closest;
}

double grid_loss_ratio(const ObservationFamily& family, std::span<const double> grid,
                       double lam, double rho, const MonteCarloKl& kl) {
  require(!grid.empty(), "grid loss ratio: empty grid");
  double closest = std::numeric_limits<double>::infinity();
  for (double c : grid) closest = std::min(closest, kl_post_vs_post(family, lam, c, kl));
  const double denom = kl_post_vs_pre(family, lam, kl) + GeometricPrior(rho).slot_weight();
  return closest / denom;
}

double max_grid_loss_ratio(const ObservationFamily& family, std::span<const double> grid,
                           double lo, double hi, double rho, std::size_t mesh_points,
                           const MonteCarloKl& kl) {
  double worst = 0.0;
  for (double lam : uniform_mesh(lo, hi, mesh_points))
    worst = std::max(worst, grid_loss_ratio(family, grid, lam, rho, kl));
  return worst;
}

double gaussian_mean_lipschitz(const ObservationFamily& family, double lo, double hi) {
  require(family.kind() == FamilyKind::gaussian_mean_shift,
          "gaussian_mean_lipschitz: family is not a gaussian mean shift");
  const double th = family.pre_param();
  const double var = family.nuisance() * family.nuisance();
  return std::max({std::fabs(hi - th), std::fabs(lo - th), hi - lo}) / var;
}

std::vector<double> design_grid(const DesignSpec& spec, const DesignOptions& options) {
  require(spec.lambda_min < spec.lambda_max, "design: need lambda_min < lambda_max");
  require(spec.epsilon > 0.0 && spec.epsilon < 1.0, "design: epsilon must lie in (0, 1)");
  const GeometricPrior prior(spec.rho);
  const ObservationFamily& fam = spec.family;
  fam.check_parameter(spec.lambda_min);
  fam.check_parameter(spec.lambda_max);

  const std::vector<double> mesh =
      uniform_mesh(spec.lambda_min, spec.lambda_max, options.mesh_points);
  const std::size_t m = mesh.size();
  std::vector<double> rate(m);
  for (std::size_t j = 0; j < m; ++j)
    rate[j] = kl_post_vs_pre(fam, mesh[j], options.kl) + prior.slot_weight();

  std::vector<double> grid;
  auto push = [&](double c) {
    if (grid.size() >= options.max_candidates)
      throw CapacityError("design: grid exceeds the cap of " +
                          std::to_string(options.max_candidates) + " candidates");
    grid.push_back(c);
  };

  if (spec.lipschitz_k) {
    const double k = *spec.lipschitz_k;
    require(k > 0.0, "design: Lipschitz constant must be positive");
    double c = *std::min_element(rate.begin(), rate.end());
    const double inner = std::clamp(fam.pre_param(), spec.lambda_min, spec.lambda_max);
    c = std::min(c, kl_post_vs_pre(fam, inner, options.kl) + prior.slot_weight());
    const double width = spec.lambda_max - spec.lambda_min;
    const double pieces = std::ceil(width / (c * spec.epsilon / k));
    if (pieces > static_cast<double>(options.max_candidates))
      throw CapacityError("design: Lipschitz construction needs " +
                          std::to_string(static_cast<long long>(pieces)) + " candidates");
    const auto count = static_cast<std::size_t>(std::max(pieces, 1.0));
    const double h = width / static_cast<double>(count);
    for (std::size_t j = 0; j < count; ++j)
      push(spec.lambda_min + (static_cast<double>(j) + 0.5) * h);
    const double worst = max_grid_loss_ratio(fam, grid, spec.lambda_min, spec.lambda_max,
                                             spec.rho, options.mesh_points, options.kl);
    if (worst > spec.epsilon)
      throw std::domain_error("design: Lipschitz constant too small, grid fails the mesh check");
    return grid;
  }

  // Greedy interval cover on the mesh. Each mesh point, used as a candidate,
  // covers the contiguous run of mesh points around it that meet the
  // condition; repeatedly pick the candidate covering the first uncovered point
  // whose run reaches furthest right.
  auto covers = [&](std::size_t cand, std::size_t j) {
    return kl_post_vs_post(fam, mesh[j], mesh[cand], options.kl) <= spec.epsilon * rate[j];
  };
  std::vector<std::size_t> left(m), right(m);
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t a = c;
    while (a > 0 && covers(c, a - 1)) --a;
    std::size_t b = c;
    while (b + 1 < m && covers(c, b + 1)) ++b;
    left[c] = a;
    right[c] = b;
  }
  std::size_t first = 0;
  while (first < m) {
    std::size_t pick = first;
    for (std::size_t c = 0; c < m; ++c)
      if (left[c] <= first && first <= right[c] && right[c] >= right[pick]) pick = c;
    push(mesh[pick]);
    first = right[pick] + 1;
  }
  return grid;
}

double threshold_for(double alpha, double rho, std::size_t candidate_count) {
  require(alpha > 0.0 && alpha <= 1.0, "threshold: alpha must lie in (0, 1]");
  require(rho > 0.0 && rho < 1.0, "threshold: rho must lie in (0, 1)");
  require(candidate_count >= 1, "threshold: need at least one candidate");
  return std::log(static_cast<double>(candidate_count)) - std::log(rho) - std::log(alpha);
}

double threshold_for(double alpha, double rho, std::span<const std::size_t> per_source_counts) {
  require(!per_source_counts.empty(), "threshold: need at least one source");
  // Sum of logs avoids overflowing prod_l I_l for many sources.
  double log_count = 0.0;
  for (std::size_t c : per_source_counts) {
    require(c >= 1, "threshold: each source needs at least one candidate");
    log_count += std::log(static_cast<double>(c));
  }
  return log_count + threshold_for(alpha, rho, std::size_t{1});
}

double add_lower_bound(double alpha, double d_total) {
  require(alpha > 0.0 && alpha <= 1.0, "lower bound: alpha must lie in (0, 1]");
  require(d_total > 0.0, "lower bound: d_total must be positive");
  return std::fabs(std::log(alpha)) / d_total;
}

double efficiency(double add_estimate, double alpha, double d_total) {
  require(add_estimate > 0.0, "efficiency: ADD estimate must be positive");
  return add_lower_bound(alpha, d_total) / add_estimate;
}

}  // namespace mchart
