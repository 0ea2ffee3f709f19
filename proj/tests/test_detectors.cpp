#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mchart/detectors.hpp"
#include "mchart/errors.hpp"
#include "mchart/log_math.hpp"
#include "mchart/simulator.hpp"

using namespace mchart;

namespace {

const std::vector<double> kGrid{0.4, 1.0, 1.6, 2.2, 2.8};

ObservationFamily mean_family() {
  return ObservationFamily::gaussian_mean_shift(0.0, 1.0, ParameterSet::interval(0.0, 3.0));
}

// Quadratic-time statistic straight from the by-start sums, with the
// Gaussian llr written out independently of the library.
double naive_log_stat(ChartVariant v, const std::vector<double>& x, std::size_t n, double lam,
                      double rho) {
  const double w = -std::log1p(-rho);
  std::vector<double> by_start;
  for (std::size_t k = 1; k <= n; ++k) {
    double s = 0.0;
    for (std::size_t q = k; q <= n; ++q) s += lam * x[q - 1] - 0.5 * lam * lam + w;
    by_start.push_back(s);
  }
  switch (v) {
    case ChartVariant::shiryaev_roberts: return log_sum_exp(by_start);
    case ChartVariant::max_chart: return *std::max_element(by_start.begin(), by_start.end());
    case ChartVariant::sum_chart: return by_start.front();
  }
  return 0.0;
}

std::vector<double> random_path(std::uint64_t seed, std::size_t len) {
  const auto f = mean_family();
  return sample_path(f, GeometricPrior(0.01), 1.0, len, seed).observations;
}

std::optional<std::uint64_t> stop_time(ChartVariant v, const std::vector<double>& x, double b) {
  ChartBank bank(mean_family(), kGrid, GeometricPrior(0.01), v, b);
  const auto r = run_to_stop(bank, x);
  if (!r) return std::nullopt;
  return r->stopped_at;
}

}  // namespace

TEST_CASE("variant names") {
  CHECK(std::string(to_string(ChartVariant::shiryaev_roberts)) == "sr");
  CHECK(std::string(to_string(ChartVariant::max_chart)) == "max");
  CHECK(std::string(to_string(ChartVariant::sum_chart)) == "sum");
}

TEST_CASE("first step from the empty past") {
  const double w = -std::log(0.99);
  for (auto v : {ChartVariant::shiryaev_roberts, ChartVariant::max_chart, ChartVariant::sum_chart}) {
    ChartBank bank(mean_family(), {1.0}, GeometricPrior(0.01), v, kPosInf);
    CHECK(bank.log_stats()[0] == (v == ChartVariant::sum_chart ? 0.0 : kNegInf));
    bank.step(0.5);
    CHECK(bank.log_stats()[0] == doctest::Approx(w).epsilon(1e-14));
    CHECK(bank.time() == 1);
  }
}

TEST_CASE("zero-llr observations grow by the slot weight") {
  const double w = -std::log(0.99);
  ChartBank max_bank(mean_family(), {1.0}, GeometricPrior(0.01), ChartVariant::max_chart, kPosInf);
  ChartBank sr_bank(mean_family(), {1.0}, GeometricPrior(0.01), ChartVariant::shiryaev_roberts,
                    kPosInf);
  std::vector<double> terms;
  for (int n = 1; n <= 30; ++n) {
    max_bank.step(0.5);
    sr_bank.step(0.5);
    terms.push_back(n * w);
    CHECK(max_bank.log_stats()[0] == doctest::Approx(n * w).epsilon(1e-12));
    CHECK(sr_bank.log_stats()[0] == doctest::Approx(log_sum_exp(terms)).epsilon(1e-12));
  }
}

TEST_CASE("stopping times on a constant path") {
  const std::vector<double> path(20, 0.5);
  auto single = [&](ChartVariant v) {
    ChartBank bank(mean_family(), {1.0}, GeometricPrior(0.01), v, 0.05);
    return run_to_stop(bank, path);
  };
  CHECK(single(ChartVariant::max_chart)->stopped_at == 5);
  CHECK(single(ChartVariant::sum_chart)->stopped_at == 5);
  CHECK(single(ChartVariant::shiryaev_roberts)->stopped_at == 2);
  const auto r = single(ChartVariant::max_chart);
  CHECK(r->firing_chart == 0);
  CHECK(r->firing_value == doctest::Approx(5 * -std::log(0.99)));
}

TEST_CASE("recursion matches the direct definition") {
  const double rho = 0.01;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto x = random_path(seed, 120);
    for (auto v : {ChartVariant::shiryaev_roberts, ChartVariant::max_chart, ChartVariant::sum_chart}) {
      ChartBank bank(mean_family(), kGrid, GeometricPrior(rho), v, kPosInf);
      const auto lib = direct_stat_trace(v, x, mean_family(), kGrid, rho);
      for (std::size_t n = 1; n <= x.size(); ++n) {
        bank.step(x[n - 1]);
        for (std::size_t i = 0; i < kGrid.size(); ++i) {
          const double naive = naive_log_stat(v, x, n, kGrid[i], rho);
          const double scale = std::max(1.0, std::fabs(naive));
          REQUIRE(std::fabs(bank.log_stats()[i] - naive) <= 1e-9 * scale);
          REQUIRE(std::fabs(lib[n - 1][i] - naive) <= 1e-9 * scale);
        }
      }
    }
  }
}

TEST_CASE("pathwise ordering of the three statistics and their stopping times") {
  for (std::uint64_t seed = 100; seed < 300; ++seed) {
    const auto x = random_path(seed, 400);
    ChartBank s(mean_family(), kGrid, GeometricPrior(0.01), ChartVariant::sum_chart, kPosInf);
    ChartBank c(mean_family(), kGrid, GeometricPrior(0.01), ChartVariant::max_chart, kPosInf);
    ChartBank r(mean_family(), kGrid, GeometricPrior(0.01), ChartVariant::shiryaev_roberts, kPosInf);
    bool ordered = true;
    for (double v : x) {
      s.step(v);
      c.step(v);
      r.step(v);
      for (std::size_t i = 0; i < kGrid.size(); ++i)
        ordered = ordered && s.log_stats()[i] <= c.log_stats()[i] &&
                  c.log_stats()[i] <= r.log_stats()[i];
    }
    CHECK(ordered);

    const double b = std::log(5.0 / 0.01 / 0.01);
    const auto tr = stop_time(ChartVariant::shiryaev_roberts, x, b);
    const auto tc = stop_time(ChartVariant::max_chart, x, b);
    const auto ts = stop_time(ChartVariant::sum_chart, x, b);
    const auto le = [](auto a, auto b) { return !b || (a && *a <= *b); };
    CHECK(le(tr, tc));
    CHECK(le(tc, ts));
  }
}

TEST_CASE("lowest index wins ties and per-chart thresholds apply") {
  // llr at x = 2 for lambda = 1, 3: 1.5 and 1.5.
  const auto f = ObservationFamily::gaussian_mean_shift(0.0, 1.0, ParameterSet::interval(0.0, 4.0));
  ChartBank tie(f, {1.0, 3.0}, GeometricPrior(0.01), ChartVariant::max_chart, 1.0);
  auto r = tie.step(2.0);
  REQUIRE(r);
  CHECK(r->firing_chart == 0);

  ChartBank split(f, {1.0, 3.0}, GeometricPrior(0.01), ChartVariant::max_chart,
                  std::vector<double>{10.0, 1.0});
  r = split.step(2.0);
  REQUIRE(r);
  CHECK(r->firing_chart == 1);
}

TEST_CASE("stopped banks reject further observations until reset") {
  ChartBank bank(mean_family(), kGrid, GeometricPrior(0.01), ChartVariant::max_chart, kNegInf);
  REQUIRE(bank.step(0.0));
  CHECK(bank.stopped());
  CHECK(bank.report()->stopped_at == 1);
  CHECK_THROWS_AS(bank.step(0.0), StateError);
  bank.reset();
  CHECK_FALSE(bank.stopped());
  CHECK(bank.time() == 0);
  CHECK(bank.log_stats()[0] == kNegInf);
}

TEST_CASE("constructor and input validation") {
  const auto f = mean_family();
  const GeometricPrior p(0.01);
  CHECK_THROWS_AS(ChartBank(f, {}, p, ChartVariant::max_chart, 1.0), std::domain_error);
  CHECK_THROWS_AS(ChartBank(f, {1.0, 1.0}, p, ChartVariant::max_chart, 1.0), std::domain_error);
  CHECK_THROWS_AS(ChartBank(f, {2.0, 1.0}, p, ChartVariant::max_chart, 1.0), std::domain_error);
  CHECK_THROWS_AS(ChartBank(f, {5.0}, p, ChartVariant::max_chart, 1.0), std::domain_error);
  CHECK_THROWS_AS(ChartBank(f, {1.0}, p, ChartVariant::max_chart, std::nan("")), std::domain_error);
  CHECK_THROWS_AS(ChartBank(f, {1.0, 2.0}, p, ChartVariant::max_chart, std::vector<double>{1.0}),
                  std::domain_error);

  ChartBank bank(f, {1.0}, p, ChartVariant::max_chart, 1.0);
  const std::vector<double> two{0.0, 0.0};
  CHECK_THROWS_AS(bank.observe(two), std::domain_error);
  CHECK_THROWS_AS(bank.step(std::nan("")), std::domain_error);
  CHECK(bank.dimension() == 1);
}

TEST_CASE("posterior identity") {
  const double rho = 0.01;
  const Posterior half = posterior_from_stat(std::log(100.0), rho);
  CHECK(half.probability == doctest::Approx(0.5));
  CHECK(half.complement == doctest::Approx(0.5));

  const Posterior p99 = posterior_from_stat(std::log(9900.0), rho);
  CHECK(p99.probability == doctest::Approx(0.99));
  CHECK(p99.complement == doctest::Approx(0.01));

  const Posterior none = posterior_from_stat(kNegInf, rho);
  CHECK(none.probability == 0.0);
  CHECK(none.complement == 1.0);

  // Extreme statistics keep both sides accurate.
  const Posterior tiny = posterior_from_stat(-600.0, rho);
  CHECK(tiny.probability > 0.0);
  CHECK(std::log(tiny.probability) == doctest::Approx(-600.0 + std::log(rho)));
  const Posterior huge = posterior_from_stat(600.0, rho);
  CHECK(huge.complement > 0.0);
  CHECK(-std::log(huge.complement) == doctest::Approx(600.0 + std::log(rho)));

  for (double lr : {-30.0, -3.0, 0.0, 4.6, 17.0, 40.0}) {
    const double back = stat_from_posterior(posterior_from_stat(lr, rho), rho);
    CHECK(std::fabs(back - lr) <= 1e-9 * std::max(1.0, std::fabs(lr)));
  }
  CHECK_THROWS_AS(posterior_from_stat(0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(posterior_from_stat(std::nan(""), rho), std::domain_error);
}
