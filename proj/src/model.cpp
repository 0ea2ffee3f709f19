#include "mchart/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mchart {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// GeometricPrior

GeometricPrior::GeometricPrior(double rho) : rho_(rho) {
  require(rho > 0.0 && rho < 1.0, "geometric prior: rho must lie in (0, 1)");
  slot_weight_ = -std::log1p(-rho);
}

double GeometricPrior::cdf(std::uint64_t k) const {
  // 1 - (1 - rho)^k
  return -std::expm1(-static_cast<double>(k) * slot_weight_);
}

std::uint64_t GeometricPrior::sample(Rng& rng) const {
  // u in (0, 1]; t = ceil(log u / log(1 - rho))
  const double u = 1.0 - std::generate_canonical<double, 64>(rng);
  const double k = std::ceil(-std::log(u) / slot_weight_);
  if (!(k >= 1.0)) return 1;
  if (k >= 1.8e19) return UINT64_MAX;
  return static_cast<std::uint64_t>(k);
}

// ---------------------------------------------------------------------------
// ParameterSet

ParameterSet ParameterSet::interval(double lo, double hi) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi,
          "parameter set: interval needs finite lo <= hi");
  ParameterSet s;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

ParameterSet ParameterSet::finite(std::vector<double> values) {
  require(!values.empty(), "parameter set: finite list is empty");
  for (double v : values) require(std::isfinite(v), "parameter set: non-finite value");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  ParameterSet s;
  s.lo_ = values.front();
  s.hi_ = values.back();
  s.values_ = std::move(values);
  return s;
}

bool ParameterSet::contains(double lam) const {
  if (is_interval()) return lam >= lo_ && lam <= hi_;
  return std::binary_search(values_.begin(), values_.end(), lam);
}

std::string ParameterSet::describe() const {
  if (is_interval()) return "[" + fmt_double(lo_) + ", " + fmt_double(hi_) + "]";
  std::string out = "{";
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (i) out += ", ";
    out += fmt_double(values_[i]);
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// ObservationFamily

ObservationFamily::ObservationFamily(FamilyKind kind, double theta0,
                                     double nuisance, ParameterSet lambdas,
                                     GenericDensity density)
    : kind_(kind),
      theta0_(theta0),
      nuisance_(nuisance),
      lambdas_(std::move(lambdas)),
      density_(std::move(density)) {}

ObservationFamily ObservationFamily::gaussian_mean_shift(double theta0,
                                                         double sigma,
                                                         ParameterSet lambdas) {
  require(std::isfinite(theta0), "gaussian mean shift: theta0 must be finite");
  require(std::isfinite(sigma) && sigma > 0.0,
          "gaussian mean shift: sigma must be positive");
  return {FamilyKind::gaussian_mean_shift, theta0, sigma, std::move(lambdas), {}};
}

ObservationFamily ObservationFamily::gaussian_variance_shift(double theta0,
                                                             double mean,
                                                             ParameterSet lambdas) {
  require(std::isfinite(theta0) && theta0 > 0.0,
          "gaussian variance shift: theta0 (pre-change sd) must be positive");
  require(std::isfinite(mean), "gaussian variance shift: mean must be finite");
  require(lambdas.lower() > 0.0,
          "gaussian variance shift: post-change sds must be positive");
  return {FamilyKind::gaussian_variance_shift, theta0, mean, std::move(lambdas), {}};
}

ObservationFamily ObservationFamily::generic(double theta0, ParameterSet lambdas,
                                             GenericDensity density) {
  require(density.log_pre && density.log_post && density.sample_pre &&
              density.sample_post,
          "generic family: all four density hooks are required");
  return {FamilyKind::generic, theta0, 0.0, std::move(lambdas), std::move(density)};
}

void ObservationFamily::check_parameter(double lam) const {
  if (!lambdas_.contains(lam))
    throw std::domain_error("post-change parameter " + fmt_double(lam) +
                            " is outside " + lambdas_.describe());
}

double ObservationFamily::sample_pre(Rng& rng) const {
  switch (kind_) {
    case FamilyKind::gaussian_mean_shift:
      return std::normal_distribution<double>(theta0_, nuisance_)(rng);
    case FamilyKind::gaussian_variance_shift:
      return std::normal_distribution<double>(nuisance_, theta0_)(rng);
    case FamilyKind::generic:
      break;
  }
  return density_.sample_pre(rng);
}

double ObservationFamily::sample_post(double lam, Rng& rng) const {
  switch (kind_) {
    case FamilyKind::gaussian_mean_shift:
      return std::normal_distribution<double>(lam, nuisance_)(rng);
    case FamilyKind::gaussian_variance_shift:
      return std::normal_distribution<double>(nuisance_, lam)(rng);
    case FamilyKind::generic:
      break;
  }
  return density_.sample_post(lam, rng);
}

std::string ObservationFamily::describe() const {
  switch (kind_) {
    case FamilyKind::gaussian_mean_shift:
      return "gaussian-mean(theta0=" + fmt_double(theta0_) +
             ", sigma=" + fmt_double(nuisance_) + ", lambda in " +
             lambdas_.describe() + ")";
    case FamilyKind::gaussian_variance_shift:
      return "gaussian-variance(theta0=" + fmt_double(theta0_) +
             ", mean=" + fmt_double(nuisance_) + ", lambda in " +
             lambdas_.describe() + ")";
    case FamilyKind::generic:
      break;
  }
  return "generic(theta0=" + fmt_double(theta0_) + ", lambda in " +
         lambdas_.describe() + ")";
}

// ---------------------------------------------------------------------------
// LLR

namespace {

// Built-in kinds: llr(x) = slope * feature(x) + offset.
struct Affine {
  double slope;
  double offset;
};

Affine affine_llr(const ObservationFamily& f, double lam) {
  const double th = f.pre_param();
  const double nu = f.nuisance();
  if (f.kind() == FamilyKind::gaussian_mean_shift) {
    // feature = x - theta0
    const double shift = lam - th;
    const double var = nu * nu;
    return {shift / var, -shift * shift / (2.0 * var)};
  }
  // gaussian_variance_shift, feature = (x - mu)^2
  return {0.5 * (1.0 / (th * th) - 1.0 / (lam * lam)), std::log(th / lam)};
}

double feature(const ObservationFamily& f, double x) {
  if (f.kind() == FamilyKind::gaussian_mean_shift) return x - f.pre_param();
  const double c = x - f.nuisance();
  return c * c;
}

}  // namespace

double llr(const ObservationFamily& family, double lam, double x) {
  family.check_parameter(lam);
  require(std::isfinite(x), "llr: observation outside the support");
  if (family.kind() == FamilyKind::generic) {
    const double v = family.density().log_post(lam, x) - family.density().log_pre(x);
    require(std::isfinite(v), "llr: observation outside the common support");
    return v;
  }
  const Affine a = affine_llr(family, lam);
  return a.slope * feature(family, x) + a.offset;
}

LlrKernel::LlrKernel(const ObservationFamily& family, std::span<const double> grid)
    : family_(family), grid_(grid.begin(), grid.end()) {
  require(!grid_.empty(), "llr kernel: empty grid");
  for (double lam : grid_) family_.check_parameter(lam);
  if (family_.kind() != FamilyKind::generic) {
    slope_.reserve(grid_.size());
    offset_.reserve(grid_.size());
    for (double lam : grid_) {
      const Affine a = affine_llr(family_, lam);
      slope_.push_back(a.slope);
      offset_.push_back(a.offset);
    }
  }
}

void LlrKernel::evaluate(double x, std::span<double> out) const {
  require(std::isfinite(x), "llr: observation outside the support");
  const std::size_t n = grid_.size();
  if (family_.kind() == FamilyKind::generic) {
    const double pre = family_.density().log_pre(x);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = family_.density().log_post(grid_[i], x) - pre;
      require(std::isfinite(out[i]), "llr: observation outside the common support");
    }
    return;
  }
  const double u = feature(family_, x);
  for (std::size_t i = 0; i < n; ++i) out[i] = slope_[i] * u + offset_[i];
}

// ---------------------------------------------------------------------------
// KL divergences

namespace {

double kl_gaussian_sd(double sd_p, double sd_q) {
  // D(N(mu, sd_p^2) || N(mu, sd_q^2))
  const double r = (sd_p * sd_p) / (sd_q * sd_q);
  return 0.5 * (r - 1.0 - std::log(r));
}

// Mean and standard error of log(p(x)/q(x)) with x ~ p.
template <typename Sampler, typename LogRatio>
KlEstimate monte_carlo_kl(const MonteCarloKl& mc, Sampler&& sample, LogRatio&& ratio) {
  require(mc.samples >= 2, "monte carlo kl: need at least two samples");
  Rng rng(mc.seed);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < mc.samples; ++k) {
    const double v = ratio(sample(rng));
    if (!std::isfinite(v))
      throw std::domain_error("monte carlo kl: log-density ratio is not integrable");
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  const double n = static_cast<double>(mc.samples);
  KlEstimate out;
  out.nats = std::max(mean, 0.0);
  out.std_error = std::sqrt(m2 / (n - 1.0) / n);
  out.samples = mc.samples;
  out.seed = mc.seed;
  return out;
}

}  // namespace

KlEstimate kl_post_vs_pre_estimate(const ObservationFamily& family, double lam,
                                   const MonteCarloKl& mc) {
  family.check_parameter(lam);
  switch (family.kind()) {
    case FamilyKind::gaussian_mean_shift: {
      const double d = lam - family.pre_param();
      return {d * d / (2.0 * family.nuisance() * family.nuisance())};
    }
    case FamilyKind::gaussian_variance_shift:
      return {kl_gaussian_sd(lam, family.pre_param())};
    case FamilyKind::generic:
      break;
  }
  const GenericDensity& g = family.density();
  return monte_carlo_kl(
      mc, [&](Rng& rng) { return g.sample_post(lam, rng); },
      [&](double x) { return g.log_post(lam, x) - g.log_pre(x); });
}

KlEstimate kl_post_vs_post_estimate(const ObservationFamily& family, double lam,
                                    double lam_i, const MonteCarloKl& mc) {
  family.check_parameter(lam);
  family.check_parameter(lam_i);
  switch (family.kind()) {
    case FamilyKind::gaussian_mean_shift: {
      const double d = lam - lam_i;
      return {d * d / (2.0 * family.nuisance() * family.nuisance())};
    }
    case FamilyKind::gaussian_variance_shift:
      return {kl_gaussian_sd(lam, lam_i)};
    case FamilyKind::generic:
      break;
  }
  if (lam == lam_i) return {0.0};
  const GenericDensity& g = family.density();
  return monte_carlo_kl(
      mc, [&](Rng& rng) { return g.sample_post(lam, rng); },
      [&](double x) { return g.log_post(lam, x) - g.log_post(lam_i, x); });
}

// ---------------------------------------------------------------------------
// Sampling

ObservationStream::ObservationStream(const ObservationFamily& family,
                                     double lam_true, std::uint64_t change_point,
                                     std::uint64_t seed)
    : family_(&family),
      lam_true_(lam_true),
      change_point_(change_point),
      pre_rng_(derive_seed(seed, {1})),
      post_rng_(derive_seed(seed, {2})) {
  family.check_parameter(lam_true);
  require(change_point >= 1, "observation stream: change point must be >= 1");
}

double ObservationStream::next() {
  ++time_;
  const FamilyKind kind = family_->kind();
  const double th = family_->pre_param();
  const double nu = family_->nuisance();
  if (time_ < change_point_) {
    switch (kind) {
      case FamilyKind::gaussian_mean_shift: return th + nu * pre_normal_(pre_rng_);
      case FamilyKind::gaussian_variance_shift: return nu + th * pre_normal_(pre_rng_);
      case FamilyKind::generic: return family_->density().sample_pre(pre_rng_);
    }
  }
  switch (kind) {
    case FamilyKind::gaussian_mean_shift: return lam_true_ + nu * post_normal_(post_rng_);
    case FamilyKind::gaussian_variance_shift: return nu + lam_true_ * post_normal_(post_rng_);
    case FamilyKind::generic: break;
  }
  return family_->density().sample_post(lam_true_, post_rng_);
}

SamplePath sample_path(const ObservationFamily& family, const GeometricPrior& prior,
                       double lam_true, std::size_t horizon, std::uint64_t seed) {
  require(horizon >= 1, "sample path: horizon must be >= 1");
  Rng change_rng(derive_seed(seed, {0}));
  SamplePath path;
  path.change_point = prior.sample(change_rng);
  ObservationStream stream(family, lam_true, path.change_point, derive_seed(seed, {1}));
  path.observations.reserve(horizon);
  for (std::size_t k = 0; k < horizon; ++k) path.observations.push_back(stream.next());
  return path;
}

}  // namespace mchart
