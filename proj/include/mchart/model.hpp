#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mchart/rng.hpp"

namespace mchart {

/// Change-point law P(t = k) = rho (1 - rho)^(k-1), k >= 1.
class GeometricPrior {
 public:
  explicit GeometricPrior(double rho);

  double rho() const noexcept { return rho_; }
  /// |log(1 - rho)|, the per-slot prior weight that every chart accrues.
  double slot_weight() const noexcept { return slot_weight_; }

  /// P(t <= k).
  double cdf(std::uint64_t k) const;
  /// Inverse-CDF draw; always >= 1.
  std::uint64_t sample(Rng& rng) const;

 private:
  double rho_;
  double slot_weight_;
};

/// The feasible post-change set: a closed interval or an explicit list.
class ParameterSet {
 public:
  static ParameterSet interval(double lo, double hi);
  static ParameterSet finite(std::vector<double> values);

  bool is_interval() const noexcept { return values_.empty(); }
  double lower() const noexcept { return lo_; }
  double upper() const noexcept { return hi_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool contains(double lam) const;
  std::string describe() const;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<double> values_;
};

enum class FamilyKind { gaussian_mean_shift, gaussian_variance_shift, generic };

/// Caller-supplied densities for families without a built-in closed form.
struct GenericDensity {
  std::function<double(double x)> log_pre;
  std::function<double(double lam, double x)> log_post;
  std::function<double(Rng&)> sample_pre;
  std::function<double(double lam, Rng&)> sample_post;
};

/// Known pre-change density g_theta0 and parametric post-change family f_lambda.
///
/// gaussian_mean_shift: g = N(theta0, sigma^2), f_lambda = N(lambda, sigma^2).
/// gaussian_variance_shift: g = N(mu, theta0^2), f_lambda = N(mu, lambda^2);
/// theta0 and lambda are standard deviations.
class ObservationFamily {
 public:
  static ObservationFamily gaussian_mean_shift(double theta0, double sigma,
                                               ParameterSet lambdas);
  static ObservationFamily gaussian_variance_shift(double theta0, double mean,
                                                   ParameterSet lambdas);
  static ObservationFamily generic(double theta0, ParameterSet lambdas,
                                   GenericDensity density);

  FamilyKind kind() const noexcept { return kind_; }
  double pre_param() const noexcept { return theta0_; }
  /// sigma for the mean-shift kind, the fixed mean for the variance-shift kind.
  double nuisance() const noexcept { return nuisance_; }
  const ParameterSet& post_params() const noexcept { return lambdas_; }
  const GenericDensity& density() const noexcept { return density_; }

  /// Throws std::domain_error when lam is not in the post-change set.
  void check_parameter(double lam) const;

  double sample_pre(Rng& rng) const;
  double sample_post(double lam, Rng& rng) const;

  std::string describe() const;

 private:
  ObservationFamily(FamilyKind kind, double theta0, double nuisance,
                    ParameterSet lambdas, GenericDensity density);

  FamilyKind kind_;
  double theta0_;
  double nuisance_;
  ParameterSet lambdas_;
  GenericDensity density_;
};

/// log f_lam(x) - log g_theta0(x), in nats, evaluated analytically for the
/// built-in kinds.
double llr(const ObservationFamily& family, double lam, double x);

/// Evaluates the LLR of one observation against every candidate of a grid.
/// Built-in kinds reduce to an affine map of a sufficient feature, so a
/// step costs one multiply-add per candidate.
class LlrKernel {
 public:
  LlrKernel(const ObservationFamily& family, std::span<const double> grid);

  std::size_t size() const noexcept { return grid_.size(); }
  const std::vector<double>& grid() const noexcept { return grid_; }

  void evaluate(double x, std::span<double> out) const;

 private:
  ObservationFamily family_;
  std::vector<double> grid_;
  std::vector<double> slope_;
  std::vector<double> offset_;
};

struct MonteCarloKl {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0x6b6c6d63ULL;
};

/// KL divergence value; std_error and samples are zero for closed forms.
struct KlEstimate {
  double nats = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

KlEstimate kl_post_vs_pre_estimate(const ObservationFamily& family, double lam,
                                   const MonteCarloKl& mc = {});
KlEstimate kl_post_vs_post_estimate(const ObservationFamily& family, double lam,
                                    double lam_i, const MonteCarloKl& mc = {});

/// D(f_lam, g_theta0).
inline double kl_post_vs_pre(const ObservationFamily& family, double lam,
                             const MonteCarloKl& mc = {}) {
  return kl_post_vs_pre_estimate(family, lam, mc).nats;
}

/// D(f_lam, f_lam_i).
inline double kl_post_vs_post(const ObservationFamily& family, double lam,
                              double lam_i, const MonteCarloKl& mc = {}) {
  return kl_post_vs_post_estimate(family, lam, lam_i, mc).nats;
}

/// Streams x_1, x_2, ... for a fixed change point. Pre- and post-change draws
/// come from separate streams, so two streams with the same seed and change
/// point emit identical pre-change prefixes whatever lam_true is.
class ObservationStream {
 public:
  ObservationStream(const ObservationFamily& family, double lam_true,
                    std::uint64_t change_point, std::uint64_t seed);

  double next();
  std::uint64_t time() const noexcept { return time_; }
  std::uint64_t change_point() const noexcept { return change_point_; }

 private:
  const ObservationFamily* family_;
  double lam_true_;
  std::uint64_t change_point_;
  std::uint64_t time_ = 0;
  Rng pre_rng_;
  Rng post_rng_;
  std::normal_distribution<double> pre_normal_;
  std::normal_distribution<double> post_normal_;
};

struct SamplePath {
  std::uint64_t change_point = 0;  // may exceed observations.size()
  std::vector<double> observations;
};

SamplePath sample_path(const ObservationFamily& family,
                       const GeometricPrior& prior, double lam_true,
                       std::size_t horizon, std::uint64_t seed);

}  // namespace mchart
