#include "mchart/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

#include "mchart/design.hpp"
#include "mchart/errors.hpp"
#include "mchart/log_math.hpp"

namespace mchart {

Scenario single_source(const ObservationFamily& family, double lam_true,
                       const GeometricPrior& prior) {
  return Scenario{{family}, {lam_true}, prior};
}

RunRecord simulate_run(const DetectorFactory& factory, const Scenario& scenario,
                       std::size_t horizon, std::uint64_t seed, std::uint64_t run) {
  const std::size_t dim = scenario.sources.size();
  if (dim == 0 || scenario.lam_true.size() != dim)
    throw std::domain_error("scenario: need one true parameter per source");
  if (horizon == 0) throw std::domain_error("simulate: horizon must be >= 1");

  const std::uint64_t run_seed = derive_seed(seed, {run});
  Rng change_rng(derive_seed(run_seed, {0}));
  RunRecord rec;
  rec.change_point = scenario.prior.sample(change_rng);

  std::vector<ObservationStream> streams;
  streams.reserve(dim);
  for (std::size_t l = 0; l < dim; ++l)
    streams.emplace_back(scenario.sources[l], scenario.lam_true[l], rec.change_point,
                         derive_seed(run_seed, {1 + l}));

  std::unique_ptr<Detector> detector = factory();
  if (detector->dimension() != dim)
    throw std::domain_error("simulate: detector dimension does not match the scenario");

  std::vector<double> x(dim);
  for (std::size_t n = 1; n <= horizon; ++n) {
    for (std::size_t l = 0; l < dim; ++l) x[l] = streams[l].next();
    if (auto stop = detector->observe(x)) {
      rec.stop_time = stop->stopped_at;
      rec.firing_chart = stop->firing_chart;
      rec.false_alarm = stop->stopped_at < rec.change_point;
      rec.delay = rec.false_alarm ? 0 : stop->stopped_at - rec.change_point;
      return rec;
    }
  }
  if (rec.change_point <= horizon) rec.delay = horizon - rec.change_point + 1;
  return rec;
}

std::vector<RunRecord> simulate_runs(const DetectorFactory& factory, const Scenario& scenario,
                                     const EstimateOptions& options) {
  if (options.n_runs == 0) throw std::domain_error("simulate: n_runs must be >= 1");
  std::vector<RunRecord> records(options.n_runs);

  unsigned workers = options.workers ? options.workers : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1,
                                 static_cast<unsigned>(std::min<std::size_t>(options.n_runs, 256)));

  auto block = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r)
      records[r] = simulate_run(factory, scenario, options.horizon, options.seed, r);
  };
  if (workers == 1) {
    block(0, options.n_runs);
    return records;
  }

  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (options.n_runs + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(options.n_runs, w * chunk);
    const std::size_t end = std::min(options.n_runs, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        block(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

McSummary summarize(std::span<const RunRecord> runs, double censor_cap) {
  McSummary s;
  s.n_runs = runs.size();
  if (runs.empty()) {
    s.valid = false;
    return s;
  }
  const double n = static_cast<double>(runs.size());
  double sum = 0.0;
  for (const RunRecord& r : runs) {
    sum += static_cast<double>(r.delay);
    if (r.false_alarm) ++s.false_alarms;
    if (r.censored()) ++s.censored_count;
  }
  s.add_hat = sum / n;
  double ss = 0.0;
  for (const RunRecord& r : runs) {
    const double d = static_cast<double>(r.delay) - s.add_hat;
    ss += d * d;
  }
  s.se_add = runs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  s.pfa_hat = static_cast<double>(s.false_alarms) / n;
  s.se_pfa = std::sqrt(s.pfa_hat * (1.0 - s.pfa_hat) / n);
  s.valid = static_cast<double>(s.censored_count) / n <= censor_cap;
  return s;
}

McSummary estimate(const DetectorFactory& factory, const Scenario& scenario,
                   const EstimateOptions& options) {
  const std::vector<RunRecord> runs = simulate_runs(factory, scenario, options);
  return summarize(runs, options.censor_cap);
}

std::size_t default_horizon(double alpha, double d_min, const GeometricPrior& prior,
                            double censor_cap) {
  if (!(d_min > 0.0)) throw std::domain_error("horizon: d_min must be positive");
  if (!(censor_cap > 0.0 && censor_cap < 1.0))
    throw std::domain_error("horizon: censor cap must lie in (0, 1)");
  const double detection = std::ceil(8.0 * std::fabs(std::log(alpha)) / d_min);
  const double allowance = std::ceil(std::fabs(std::log(censor_cap / 10.0)) / prior.slot_weight());
  return static_cast<std::size_t>(detection + allowance);
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> direct_stat_trace(ChartVariant variant,
                                                   std::span<const double> path,
                                                   const ObservationFamily& family,
                                                   std::span<const double> grid, double rho,
                                                   std::size_t cap) {
  if (path.size() > cap)
    throw CapacityError("direct oracle: path length " + std::to_string(path.size()) +
                        " exceeds cap " + std::to_string(cap));
  const double w = GeometricPrior(rho).slot_weight();
  const std::size_t len = path.size();

  // term(q, i) = log[(1/(1-rho)) f_i(x_q) / g(x_q)]
  std::vector<std::vector<double>> term(len, std::vector<double>(grid.size()));
  for (std::size_t q = 0; q < len; ++q)
    for (std::size_t i = 0; i < grid.size(); ++i) term[q][i] = w + llr(family, grid[i], path[q]);

  std::vector<std::vector<double>> trace(len, std::vector<double>(grid.size()));
  std::vector<double> by_start;
  for (std::size_t n = 1; n <= len; ++n) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      // by_start[j] = sum_{q=k..n} term(q), k = n - j
      by_start.assign(n, 0.0);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += term[n - 1 - j][i];
        by_start[j] = acc;
      }
      double v = 0.0;
      switch (variant) {
        case ChartVariant::shiryaev_roberts: v = log_sum_exp(by_start); break;
        case ChartVariant::max_chart: v = *std::max_element(by_start.begin(), by_start.end()); break;
        case ChartVariant::sum_chart: v = by_start.back(); break;
      }
      trace[n - 1][i] = v;
    }
  }
  return trace;
}

std::vector<double> direct_window_trace(const std::vector<SourceSpec>& sources,
                                        const std::vector<std::vector<double>>& paths,
                                        double rho, std::size_t window, std::size_t cap) {
  const std::size_t dim = sources.size();
  if (dim == 0 || paths.size() != dim)
    throw std::domain_error("direct window oracle: one path per source required");
  const std::size_t len = paths.front().size();
  for (const auto& p : paths)
    if (p.size() != len) throw std::domain_error("direct window oracle: ragged paths");
  if (len > cap)
    throw CapacityError("direct window oracle: path length " + std::to_string(len) +
                        " exceeds cap " + std::to_string(cap));
  const double w = GeometricPrior(rho).slot_weight();

  // llr[l][i][q]
  std::vector<std::vector<std::vector<double>>> table(dim);
  std::size_t composites = 1;
  for (std::size_t l = 0; l < dim; ++l) {
    const auto& grid = sources[l].grid;
    composites *= grid.size();
    table[l].assign(grid.size(), std::vector<double>(len));
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t q = 0; q < len; ++q)
        table[l][i][q] = llr(sources[l].family, grid[i], paths[l][q]);
  }

  std::vector<double> trace(len, kNegInf);
  std::vector<std::size_t> rows(dim);
  for (std::size_t n = 1; n <= len; ++n) {
    const std::size_t span = std::min(n, window + 1);
    double best = kNegInf;
    std::fill(rows.begin(), rows.end(), 0);
    for (std::size_t u = 0; u < composites; ++u) {
      // log C~_n^(u) = max over k in [n - span + 1, n] of sum_{q=k..n} [w + sum_l llr]
      double acc = 0.0;
      for (std::size_t j = 0; j < span; ++j) {
        const std::size_t q = n - 1 - j;
        double joint = w;
        for (std::size_t l = 0; l < dim; ++l) joint += table[l][rows[l]][q];
        acc += joint;
        best = std::max(best, acc);
      }
      for (std::size_t l = 0; l < dim; ++l) {
        if (++rows[l] < table[l].size()) break;
        rows[l] = 0;
      }
    }
    trace[n - 1] = best;
  }
  return trace;
}

// ---------------------------------------------------------------------------

std::vector<SweepRow> add_vs_alpha_sweep(const SweepSpec& spec, std::span<const double> alphas) {
  if (alphas.empty()) throw std::domain_error("sweep: alpha list is empty");
  for (std::size_t j = 1; j < alphas.size(); ++j)
    if (!(alphas[j] < alphas[j - 1]))
      throw std::domain_error("sweep: alphas must be strictly decreasing");
  if (!spec.make) throw std::domain_error("sweep: no detector builder");

  const double rho = spec.scenario.prior.rho();
  std::vector<SweepRow> rows;
  rows.reserve(alphas.size());
  for (double alpha : alphas) {
    const double log_b = threshold_for(alpha, rho, spec.candidate_counts);
    EstimateOptions opts;
    opts.n_runs = spec.n_runs;
    opts.seed = spec.seed;
    opts.censor_cap = spec.censor_cap;
    opts.workers = spec.workers;
    opts.horizon = spec.horizon ? *spec.horizon
                                : default_horizon(alpha, spec.d_horizon, spec.scenario.prior,
                                                  spec.censor_cap);
    SweepRow row;
    row.alpha = alpha;
    row.log_alpha_abs = std::fabs(std::log(alpha));
    row.detector = spec.detector_name;
    row.lambda_true = spec.scenario.lam_true;
    row.summary = estimate(spec.make(log_b), spec.scenario, opts);
    row.lower_bound = add_lower_bound(alpha, spec.d_total);
    row.efficiency = row.summary.add_hat > 0.0
                         ? efficiency(row.summary.add_hat, alpha, spec.d_total)
                         : std::numeric_limits<double>::quiet_NaN();
    row.horizon = opts.horizon;
    row.seed = spec.seed;
    rows.push_back(std::move(row));
  }
  return rows;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::domain_error("fit_line: need at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::domain_error("fit_line: x values are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

}  // namespace mchart
