#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mchart/design.hpp"
#include "mchart/detectors.hpp"
#include "mchart/errors.hpp"
#include "mchart/log_math.hpp"
#include "mchart/simulator.hpp"

using namespace mchart;

namespace {

const std::vector<double> kD1{0.4, 1.6, 2.8};

ObservationFamily fig4_family() {
  return ObservationFamily::gaussian_mean_shift(0.0, 1.0, ParameterSet::interval(0.4, 2.8));
}

DetectorFactory bank_factory(ChartVariant v, double log_b, std::vector<double> grid = kD1) {
  return [=] {
    return std::make_unique<ChartBank>(fig4_family(), grid, GeometricPrior(0.01), v, log_b);
  };
}

EstimateOptions options(std::size_t runs, std::size_t horizon, std::uint64_t seed) {
  EstimateOptions o;
  o.n_runs = runs;
  o.horizon = horizon;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("immediate stopping is a false alarm unless the change is at slot one") {
  const auto sc = single_source(fig4_family(), 1.0, GeometricPrior(0.01));
  const McSummary s = estimate(bank_factory(ChartVariant::max_chart, kNegInf), sc,
                               options(20000, 10, 3));
  CHECK(s.valid);
  CHECK(s.add_hat == 0.0);
  CHECK(std::fabs(s.pfa_hat - 0.99) < 4.0 * std::sqrt(0.99 * 0.01 / 20000));
  CHECK(s.se_pfa == doctest::Approx(std::sqrt(s.pfa_hat * (1 - s.pfa_hat) / 20000)).epsilon(1e-9));
}

TEST_CASE("a detector that never fires is censored and invalid") {
  const auto sc = single_source(fig4_family(), 1.0, GeometricPrior(0.01));
  const McSummary s = estimate(bank_factory(ChartVariant::max_chart, kPosInf), sc,
                               options(500, 50, 3));
  CHECK(s.censored_count == 500);
  CHECK_FALSE(s.valid);
  CHECK(s.false_alarms == 0);
}

TEST_CASE("summaries include zero delays and use the run count") {
  std::vector<RunRecord> runs(4);
  runs[0] = {10, 5, 0, true, 0};
  runs[1] = {10, 12, 0, false, 2};
  runs[2] = {3, 9, 0, false, 6};
  runs[3] = {7, std::nullopt, std::nullopt, false, 4};
  const McSummary s = summarize(runs, 0.5);
  CHECK(s.n_runs == 4);
  CHECK(s.add_hat == doctest::Approx(3.0));
  CHECK(s.pfa_hat == doctest::Approx(0.25));
  CHECK(s.false_alarms == 1);
  CHECK(s.censored_count == 1);
  CHECK(s.valid);
  CHECK_FALSE(summarize(runs, 0.1).valid);
}

TEST_CASE("false-alarm probability respects the threshold") {
  const auto sc = single_source(fig4_family(), 1.0, GeometricPrior(0.01));
  for (double alpha : {0.1, 0.05}) {
    for (auto v : {ChartVariant::shiryaev_roberts, ChartVariant::max_chart}) {
      const double b = threshold_for(alpha, 0.01, kD1.size());
      const McSummary s = estimate(bank_factory(v, b), sc, options(4000, 1500, 11));
      CHECK(s.valid);
      CHECK(s.pfa_hat <= alpha + 3.0 * s.se_pfa);
    }
  }
}

TEST_CASE("false alarms do not depend on the post-change parameter") {
  const auto f = fig4_family();
  const GeometricPrior prior(0.01);
  const double b = threshold_for(0.1, 0.01, kD1.size());
  const auto a = simulate_runs(bank_factory(ChartVariant::max_chart, b),
                               single_source(f, 0.4, prior), options(2000, 600, 5));
  const auto c = simulate_runs(bank_factory(ChartVariant::max_chart, b),
                               single_source(f, 2.8, prior), options(2000, 600, 5));
  REQUIRE(a.size() == c.size());
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same += a[i].false_alarm == c[i].false_alarm;
    if (a[i].false_alarm) CHECK(a[i].stop_time == c[i].stop_time);
  }
  CHECK(same == a.size());
}

TEST_CASE("shared seeds order the stopping times of the two detectors") {
  const auto sc = single_source(fig4_family(), 1.0, GeometricPrior(0.01));
  const double b = threshold_for(0.01, 0.01, kD1.size());
  const auto r = simulate_runs(bank_factory(ChartVariant::shiryaev_roberts, b), sc,
                               options(2000, 1500, 9));
  const auto c = simulate_runs(bank_factory(ChartVariant::max_chart, b), sc, options(2000, 1500, 9));
  bool ordered = true;
  for (std::size_t i = 0; i < r.size(); ++i) {
    REQUIRE(r[i].change_point == c[i].change_point);
    ordered = ordered && (!c[i].stop_time || (r[i].stop_time && *r[i].stop_time <= *c[i].stop_time));
  }
  CHECK(ordered);
}

TEST_CASE("results do not depend on the worker count") {
  const auto sc = single_source(fig4_family(), 1.0, GeometricPrior(0.01));
  const auto factory = bank_factory(ChartVariant::shiryaev_roberts, threshold_for(0.05, 0.01, 3));
  auto o = options(1500, 600, 21);
  o.workers = 1;
  const McSummary one = estimate(factory, sc, o);
  o.workers = 4;
  const McSummary four = estimate(factory, sc, o);
  CHECK(one.add_hat == four.add_hat);
  CHECK(one.pfa_hat == four.pfa_hat);
  CHECK(one.se_add == four.se_add);
  o.seed = 22;
  CHECK(estimate(factory, sc, o).add_hat != one.add_hat);
}

TEST_CASE("single runs are addressable") {
  const auto sc = single_source(fig4_family(), 1.0, GeometricPrior(0.01));
  const auto factory = bank_factory(ChartVariant::max_chart, threshold_for(0.05, 0.01, 3));
  const auto all = simulate_runs(factory, sc, options(50, 600, 4));
  const RunRecord r = simulate_run(factory, sc, 600, 4, 17);
  CHECK(r.change_point == all[17].change_point);
  CHECK(r.stop_time == all[17].stop_time);
  CHECK(r.delay == all[17].delay);
}

TEST_CASE("scenario validation") {
  Scenario bad{{fig4_family()}, {}, GeometricPrior(0.01)};
  CHECK_THROWS_AS(simulate_run(bank_factory(ChartVariant::max_chart, 1.0), bad, 10, 1, 0),
                  std::domain_error);
  const auto sc = single_source(fig4_family(), 1.0, GeometricPrior(0.01));
  CHECK_THROWS_AS(simulate_run(bank_factory(ChartVariant::max_chart, 1.0), sc, 0, 1, 0),
                  std::domain_error);
  CHECK_THROWS_AS(estimate(bank_factory(ChartVariant::max_chart, 1.0), sc, options(0, 10, 1)),
                  std::domain_error);
}

TEST_CASE("default horizon") {
  const GeometricPrior prior(0.01);
  const std::size_t h = default_horizon(1e-3, 0.33, prior, 1e-3);
  const auto expect = std::ceil(8.0 * std::log(1e3) / 0.33) +
                      std::ceil(std::log(1e4) / prior.slot_weight());
  CHECK(h == static_cast<std::size_t>(expect));
  CHECK(std::pow(0.99, std::ceil(std::log(1e4) / prior.slot_weight())) <= 1e-4);
  CHECK_THROWS_AS(default_horizon(1e-3, 0.0, prior), std::domain_error);
}

TEST_CASE("oracle capacity") {
  const std::vector<double> path(kOracleMaxLength + 1, 0.0);
  CHECK_THROWS_AS(direct_stat_trace(ChartVariant::max_chart, path, fig4_family(), kD1, 0.01),
                  CapacityError);
}

TEST_CASE("alpha sweeps") {
  const auto f = fig4_family();
  const GeometricPrior prior(0.01);
  SweepSpec spec{.detector_name = "msr/D1",
                 .make = [](double b) { return bank_factory(ChartVariant::shiryaev_roberts, b); },
                 .candidate_counts = {kD1.size()},
                 .scenario = single_source(f, 1.0, prior),
                 .d_total = single_source_rate(f, 1.0, 0.01),
                 .d_horizon = grid_rate(f, kD1, 1.0, 0.01),
                 .n_runs = 800,
                 .horizon = std::nullopt,
                 .seed = 3,
                 .censor_cap = 1e-3,
                 .workers = 0};
  const std::vector<double> alphas{0.1, 0.01};
  const auto rows = add_vs_alpha_sweep(spec, alphas);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].detector == "msr/D1");
  CHECK(rows[0].seed == 3);
  CHECK(rows[1].log_alpha_abs == doctest::Approx(std::log(100.0)));
  CHECK(rows[1].lower_bound == doctest::Approx(add_lower_bound(0.01, spec.d_total)));
  CHECK(rows[1].efficiency == doctest::Approx(rows[1].lower_bound / rows[1].summary.add_hat));
  CHECK(rows[0].summary.add_hat < rows[1].summary.add_hat);

  const std::vector<double> unordered{0.01, 0.1};
  CHECK_THROWS_AS(add_vs_alpha_sweep(spec, unordered), std::domain_error);
  CHECK_THROWS_AS(add_vs_alpha_sweep(spec, std::vector<double>{}), std::domain_error);
}

TEST_CASE("line fit") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{3, 5, 7, 9};
  const LineFit fit = fit_line(x, y);
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  const std::vector<double> noisy{3, 5.5, 6.5, 9};
  CHECK(fit_line(x, noisy).r_squared < 1.0);
  CHECK_THROWS_AS(fit_line(std::vector<double>{1}, std::vector<double>{1}), std::domain_error);
  CHECK_THROWS_AS(fit_line(std::vector<double>{1, 1}, std::vector<double>{1, 2}), std::domain_error);
}
