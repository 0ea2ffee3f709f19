#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mchart/detectors.hpp"
#include "mchart/errors.hpp"
#include "mchart/log_math.hpp"
#include "mchart/multisource.hpp"
#include "mchart/simulator.hpp"

using namespace mchart;

namespace {

const std::vector<double> kFig5Grid{1.5, 1.6, 1.7, 2.0, 2.1, 2.2, 2.3};

ObservationFamily variance_family() {
  return ObservationFamily::gaussian_variance_shift(1.0, 0.0, ParameterSet::interval(1.0, 3.0));
}

double variance_llr(double lam, double x) {
  return -std::log(lam) + 0.5 * x * x * (1.0 - 1.0 / (lam * lam));
}

std::vector<std::vector<double>> random_paths(std::size_t sources, std::size_t len,
                                              std::uint64_t seed, double sd) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<std::vector<double>> p(sources, std::vector<double>(len));
  for (auto& row : p)
    for (double& v : row) v = normal(rng);
  return p;
}

// Two-source windowed statistic by explicit enumeration of every composite
// candidate and every start.
double naive_two_source(const std::vector<std::vector<double>>& x, const std::vector<double>& g0,
                        const std::vector<double>& g1, std::size_t n, std::size_t m, double rho) {
  const double w = -std::log1p(-rho);
  double best = kNegInf;
  const std::size_t k0 = n > m ? n - m : 1;
  for (double a : g0) {
    for (double b : g1) {
      for (std::size_t k = k0; k <= n; ++k) {
        double s = 0.0;
        for (std::size_t q = k; q <= n; ++q)
          s += w + variance_llr(a, x[0][q - 1]) + variance_llr(b, x[1][q - 1]);
        best = std::max(best, s);
      }
    }
  }
  return best;
}

std::vector<double> column(const std::vector<std::vector<double>>& p, std::size_t n) {
  std::vector<double> c;
  for (const auto& row : p) c.push_back(row[n]);
  return c;
}

}  // namespace

TEST_CASE("one source with a long window reduces to the max chart") {
  const auto f = variance_family();
  const GeometricPrior prior(0.01);
  const auto paths = random_paths(1, 150, 5, 1.8);
  WindowEngine eng({{f, kFig5Grid}}, prior, 200, kPosInf);
  ChartBank bank(f, kFig5Grid, prior, ChartVariant::max_chart, kPosInf);
  for (double x : paths[0]) {
    eng.window_step(std::vector<double>{x});
    bank.step(x);
    const auto& s = bank.log_stats();
    const double top = *std::max_element(s.begin(), s.end());
    REQUIRE(eng.statistic() == doctest::Approx(top).epsilon(1e-12));
  }
}

TEST_CASE("identity candidates give the pure prior weight") {
  const auto f = variance_family();
  const GeometricPrior prior(0.01);
  const double w = prior.slot_weight();
  const std::size_t m = 10;
  WindowEngine eng({{f, {1.0}}, {f, {1.0}}}, prior, m, kPosInf);
  const auto paths = random_paths(2, 40, 3, 1.0);
  for (std::size_t n = 1; n <= 40; ++n) {
    eng.window_step(column(paths, n - 1));
    CHECK(eng.statistic() == doctest::Approx(double(std::min(n, m + 1)) * w).epsilon(1e-12));
    CHECK(eng.best_start() == (n > m ? n - m : 1));
  }
}

TEST_CASE("decomposed statistic equals exhaustive enumeration") {
  const GeometricPrior prior(0.01);
  const auto f = variance_family();
  const std::vector<double> g0{1.0, 1.5, 2.0};
  const std::vector<double> g1{1.2, 2.2};
  for (std::size_t m : {0u, 1u, 4u, 12u}) {
    const auto paths = random_paths(2, 40, 100 + m, 1.5);
    WindowEngine eng({{f, g0}, {f, g1}}, prior, m, kPosInf);
    ProductSetEngine prod({{f, g0}, {f, g1}}, prior, m, kPosInf);
    CHECK(prod.composite_count() == 6);
    for (std::size_t n = 1; n <= 40; ++n) {
      const auto col = column(paths, n - 1);
      eng.window_step(col);
      prod.step(col);
      const double ref = naive_two_source(paths, g0, g1, n, m, 0.01);
      const double tol = 1e-9 * std::max(1.0, std::fabs(ref));
      REQUIRE(std::fabs(eng.statistic() - ref) <= tol);
      REQUIRE(std::fabs(prod.statistic() - ref) <= tol);
    }
  }
}

TEST_CASE("three sources of seven candidates against the library oracle") {
  const GeometricPrior prior(0.01);
  const auto f = variance_family();
  const std::vector<SourceSpec> sources(3, SourceSpec{f, kFig5Grid});
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto paths = random_paths(3, 80, seed, 1.9);
    const auto ref = direct_window_trace(sources, paths, 0.01, 20);
    WindowEngine eng(sources, prior, 20, kPosInf);
    double worst = 0.0;
    for (std::size_t n = 1; n <= 80; ++n) {
      eng.window_step(column(paths, n - 1));
      worst = std::max(worst, std::fabs(eng.statistic() - ref[n - 1]) /
                                  std::max(1.0, std::fabs(ref[n - 1])));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("argmax bookkeeping identifies the maximizing composite") {
  const GeometricPrior prior(0.01);
  const auto f = variance_family();
  const std::vector<double> g0{1.0, 1.5, 2.0};
  const std::vector<double> g1{1.2, 2.2};
  WindowEngine eng({{f, g0}, {f, g1}}, prior, 6, kPosInf);
  const auto paths = random_paths(2, 30, 77, 2.0);
  const double w = prior.slot_weight();
  for (std::size_t n = 1; n <= 30; ++n) {
    eng.window_step(column(paths, n - 1));
    const auto rows = eng.best_rows();
    const std::size_t k = eng.best_start();
    double s = 0.0;
    for (std::size_t q = k; q <= n; ++q)
      s += w + variance_llr(g0[rows[0]], paths[0][q - 1]) + variance_llr(g1[rows[1]], paths[1][q - 1]);
    REQUIRE(s == doctest::Approx(eng.statistic()).epsilon(1e-12));
    CHECK(eng.composite_index(rows) == rows[0] + 3 * rows[1]);
  }
}

TEST_CASE("ring buffer cells hold partial sums by start") {
  const auto f = variance_family();
  const std::vector<double> grid{1.5, 2.0};
  SourceUnit unit({f, grid}, 3);
  CHECK(unit.slots() == 4);
  const std::vector<double> xs{0.3, -1.2, 2.0, 0.7, -0.4, 1.1};
  for (std::size_t n = 1; n <= xs.size(); ++n) {
    unit.update(xs[n - 1], n);
    const std::size_t k0 = n > 3 ? n - 3 : 1;
    for (std::size_t k = k0; k <= n; ++k) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        double s = 0.0;
        for (std::size_t q = k; q <= n; ++q) s += variance_llr(grid[i], xs[q - 1]);
        CHECK(unit.cell(i, unit.slot_of(k)) == doctest::Approx(s).epsilon(1e-12));
      }
      const double top = std::max(unit.cell(0, unit.slot_of(k)), unit.cell(1, unit.slot_of(k)));
      CHECK(unit.max_container()[unit.slot_of(k)] == top);
    }
  }
}

TEST_CASE("work counters follow the linear cost model") {
  const auto f = variance_family();
  const std::size_t m = 9;
  for (std::size_t sources : {1u, 2u, 5u}) {
    WindowEngine eng(std::vector<SourceSpec>(sources, SourceSpec{f, kFig5Grid}), GeometricPrior(0.01),
                     m, kPosInf);
    const auto paths = random_paths(sources, 25, 1, 1.0);
    std::uint64_t combines = 0;
    for (std::size_t n = 1; n <= 25; ++n) {
      eng.window_step(column(paths, n - 1));
      combines += std::min<std::size_t>(n, m + 1);
    }
    CHECK(eng.work().table_cells == 25 * sources * kFig5Grid.size() * (m + 1));
    CHECK(eng.work().max_scans == 25 * sources * (m + 1));
    CHECK(eng.work().combines == combines);
  }
}

TEST_CASE("longer windows never lower the statistic") {
  const auto f = variance_family();
  const GeometricPrior prior(0.01);
  const std::vector<SourceSpec> sources(2, SourceSpec{f, {1.5, 2.0, 2.3}});
  const auto paths = random_paths(2, 60, 8, 1.7);
  WindowEngine short_w(sources, prior, 5, kPosInf);
  WindowEngine long_w(sources, prior, 30, kPosInf);
  for (std::size_t n = 1; n <= 60; ++n) {
    short_w.window_step(column(paths, n - 1));
    long_w.window_step(column(paths, n - 1));
    CHECK(short_w.statistic() <= long_w.statistic());
  }
}

TEST_CASE("stopping and state errors") {
  const auto f = variance_family();
  WindowEngine eng({{f, {2.0}}, {f, {2.0}}}, GeometricPrior(0.01), 5, kNegInf);
  const std::vector<double> x{0.0, 0.0};
  const auto r = eng.window_step(x);
  REQUIRE(r);
  CHECK(r->stopped_at == 1);
  CHECK(r->firing_chart == 0);
  CHECK_THROWS_AS(eng.window_step(x), StateError);

  WindowEngine fresh({{f, {2.0}}, {f, {2.0}}}, GeometricPrior(0.01), 5, 1.0);
  CHECK_THROWS_AS(fresh.window_step(std::vector<double>{0.0}), std::domain_error);
  CHECK_THROWS_AS(WindowEngine({}, GeometricPrior(0.01), 5, 1.0), std::domain_error);
  CHECK_THROWS_AS(WindowEngine({{f, {}}}, GeometricPrior(0.01), 5, 1.0), std::domain_error);
  CHECK_THROWS_AS(WindowEngine({{f, {2.0, 1.5}}}, GeometricPrior(0.01), 5, 1.0), std::domain_error);
  CHECK_THROWS_AS(WindowEngine({{f, {2.0}}}, GeometricPrior(0.01), 5, std::nan("")),
                  std::domain_error);
}

TEST_CASE("window length rule") {
  const WindowLength wl = window_length_for(1e-3, 0.5, 1.5);
  CHECK(wl.length == 21);
  CHECK_FALSE(wl.advisory);
  CHECK(window_length_for(0.1, 0.01, 2.0).advisory);
  CHECK_THROWS_AS(window_length_for(0.0, 0.5, 1.5), std::domain_error);
  CHECK_THROWS_AS(window_length_for(1e-3, 0.0, 1.5), std::domain_error);
  CHECK_THROWS_AS(window_length_for(1e-3, 0.5, 1.0), std::domain_error);
}

TEST_CASE("composite divergence") {
  const auto f = variance_family();
  const std::vector<ObservationFamily> fams(3, f);
  const std::vector<double> lam{1.7, 2.0, 2.2};
  double expect = -std::log(0.99);
  for (double l : lam) expect += 0.5 * (l * l - 1.0 - std::log(l * l));
  CHECK(composite_kl(fams, lam, GeometricPrior(0.01)) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(2.3628).epsilon(1e-4));
  CHECK_THROWS_AS(composite_kl(fams, std::vector<double>{1.7}, GeometricPrior(0.01)),
                  std::domain_error);
}
