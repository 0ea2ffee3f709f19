#include "mchart/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "mchart/design.hpp"
#include "mchart/detectors.hpp"
#include "mchart/errors.hpp"
#include "mchart/log_math.hpp"
#include "mchart/multisource.hpp"

namespace mchart {

namespace {

ObservationFamily make_family(const ExperimentConfig& c, ParameterSet lambdas) {
  if (c.family == "gaussian-variance")
    return ObservationFamily::gaussian_variance_shift(c.family_pre, c.family_nuisance,
                                                      std::move(lambdas));
  return ObservationFamily::gaussian_mean_shift(c.family_pre, c.family_nuisance,
                                                std::move(lambdas));
}

// Interval when configured, otherwise the finite set of every value named.
ParameterSet parameter_set(const ExperimentConfig& c, std::vector<double> values) {
  if (c.lambda_interval)
    return ParameterSet::interval(c.lambda_interval->first, c.lambda_interval->second);
  return ParameterSet::finite(std::move(values));
}

ChartVariant variant_of(const std::string& name) {
  if (name == "msr") return ChartVariant::shiryaev_roberts;
  if (name == "mmsr") return ChartVariant::max_chart;
  return ChartVariant::sum_chart;
}

std::function<DetectorFactory(double)> chart_bank_builder(ObservationFamily family,
                                                          std::vector<double> grid,
                                                          GeometricPrior prior,
                                                          ChartVariant variant) {
  return [=](double log_b) -> DetectorFactory {
    return [=] { return std::make_unique<ChartBank>(family, grid, prior, variant, log_b); };
  };
}

void append_rows(ExperimentOutcome& out, std::vector<SweepRow> rows) {
  for (SweepRow& r : rows) {
    if (!r.summary.valid) {
      out.valid = false;
      out.notes.push_back(fmt::format(
          "{} at alpha={:g}: {} of {} runs censored (cap {:g})", r.detector, r.alpha,
          r.summary.censored_count, r.summary.n_runs, out.config.censor_cap));
    }
    out.rows.push_back(std::move(r));
  }
}

void run_single_sweep(ExperimentOutcome& out, unsigned workers) {
  const ExperimentConfig& c = out.config;
  std::vector<double> named = c.lambda_true;
  for (const auto& g : c.grids) named.insert(named.end(), g.begin(), g.end());
  const ObservationFamily family = make_family(c, parameter_set(c, named));
  const GeometricPrior prior(c.rho);

  for (std::size_t g = 0; g < c.grids.size(); ++g) {
    for (const std::string& det : c.detectors) {
      for (double lam : c.lambda_true) {
        SweepSpec spec{.detector_name = fmt::format("{}/D{}", det, g + 1),
                       .make = chart_bank_builder(family, c.grids[g], prior, variant_of(det)),
                       .candidate_counts = {c.grids[g].size()},
                       .scenario = single_source(family, lam, prior),
                       .d_total = single_source_rate(family, lam, c.rho),
                       .d_horizon = std::max(grid_rate(family, c.grids[g], lam, c.rho),
                                             0.05 * single_source_rate(family, lam, c.rho)),
                       .n_runs = c.runs,
                       .horizon = c.horizon,
                       .seed = c.seed,
                       .censor_cap = c.censor_cap,
                       .workers = workers};
        append_rows(out, add_vs_alpha_sweep(spec, c.alphas));
      }
    }
  }
}

void run_epsilon_design(ExperimentOutcome& out, unsigned workers) {
  const ExperimentConfig& c = out.config;
  const auto [lo, hi] = *c.lambda_interval;
  const ObservationFamily family = make_family(c, ParameterSet::interval(lo, hi));
  const GeometricPrior prior(c.rho);

  DesignSpec ds{family, lo, hi, c.epsilon, c.rho, std::nullopt};
  if (c.lipschitz == "auto") ds.lipschitz_k = gaussian_mean_lipschitz(family, lo, hi);
  else if (c.lipschitz != "none") ds.lipschitz_k = std::stod(c.lipschitz);
  DesignOptions opts;
  opts.mesh_points = c.mesh;
  const std::vector<double> grid = design_grid(ds, opts);
  const double worst = max_grid_loss_ratio(family, grid, lo, hi, c.rho, c.mesh);

  out.resolved["designed_grid"] = grid;
  out.resolved["max_loss_ratio"] = worst;
  if (ds.lipschitz_k) out.resolved["lipschitz_k"] = *ds.lipschitz_k;

  // Candidates, midpoints between neighbours, and any configured truths.
  std::set<double> truths(grid.begin(), grid.end());
  for (std::size_t i = 1; i < grid.size(); ++i) truths.insert(0.5 * (grid[i - 1] + grid[i]));
  truths.insert(c.lambda_true.begin(), c.lambda_true.end());
  out.resolved["evaluated_lambdas"] = std::vector<double>(truths.begin(), truths.end());

  for (const std::string& det : c.detectors) {
    for (double lam : truths) {
      SweepSpec spec{.detector_name = det + "/designed",
                     .make = chart_bank_builder(family, grid, prior, variant_of(det)),
                     .candidate_counts = {grid.size()},
                     .scenario = single_source(family, lam, prior),
                     .d_total = single_source_rate(family, lam, c.rho),
                     .d_horizon = std::max(grid_rate(family, grid, lam, c.rho),
                                           0.05 * single_source_rate(family, lam, c.rho)),
                     .n_runs = c.runs,
                     .horizon = c.horizon,
                     .seed = c.seed,
                     .censor_cap = c.censor_cap,
                     .workers = workers};
      append_rows(out, add_vs_alpha_sweep(spec, c.alphas));
    }
  }
}

std::vector<SourceSpec> make_sources(const ExperimentConfig& c,
                                     const std::vector<double>& truths) {
  std::vector<SourceSpec> sources;
  for (std::size_t l = 0; l < c.grids.size(); ++l) {
    std::vector<double> named = c.grids[l];
    if (l < truths.size()) named.push_back(truths[l]);
    sources.push_back({make_family(c, parameter_set(c, named)), c.grids[l]});
  }
  return sources;
}

void run_multisource_sweep(ExperimentOutcome& out, unsigned workers) {
  const ExperimentConfig& c = out.config;
  const GeometricPrior prior(c.rho);
  const std::vector<SourceSpec> sources = make_sources(c, c.lambda_true);
  std::vector<ObservationFamily> families;
  for (const SourceSpec& s : sources) families.push_back(s.family);

  // d over the product set: smallest and at the truth (through the closest
  // candidate of each source).
  double d_min = prior.slot_weight();
  double d_truth = prior.slot_weight();
  for (std::size_t l = 0; l < sources.size(); ++l) {
    double smallest = std::numeric_limits<double>::infinity();
    double closest = std::numeric_limits<double>::infinity();
    for (double lam_i : sources[l].grid) {
      smallest = std::min(smallest, kl_post_vs_pre(families[l], lam_i));
      closest = std::min(closest, kl_post_vs_post(families[l], c.lambda_true[l], lam_i));
    }
    d_min += smallest;
    d_truth += kl_post_vs_pre(families[l], c.lambda_true[l]) - closest;
  }
  const double d_total = composite_kl(families, c.lambda_true, prior);

  std::size_t window = 0;
  if (c.window) {
    window = *c.window;
  } else {
    const double alpha = std::min(c.alphas.back(), 0.5);
    const WindowLength wl = window_length_for(alpha, d_min, c.window_slack);
    window = wl.length;
    if (wl.advisory)
      out.notes.push_back(fmt::format(
          "window {} is long relative to |log alpha| = {:.4g}", window, std::fabs(std::log(alpha))));
  }
  out.resolved["window_slots"] = window;
  out.resolved["d_min"] = d_min;
  out.resolved["d_total"] = d_total;

  std::vector<std::size_t> counts;
  for (const SourceSpec& s : sources) counts.push_back(s.grid.size());
  SweepSpec spec{.detector_name = "window-mmsr",
                 .make = [sources, prior, window](double log_b) -> DetectorFactory {
                   return [=] {
                     return std::make_unique<WindowEngine>(sources, prior, window, log_b);
                   };
                 },
                 .candidate_counts = counts,
                 .scenario = Scenario{families, c.lambda_true, prior},
                 .d_total = d_total,
                 .d_horizon = std::max(d_truth, 0.05 * d_total),
                 .n_runs = c.runs,
                 .horizon = c.horizon,
                 .seed = c.seed,
                 .censor_cap = c.censor_cap,
                 .workers = workers};
  append_rows(out, add_vs_alpha_sweep(spec, c.alphas));
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.10g}", v);
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig selftest_config() {
  ExperimentConfig c;
  c.name = "selftest";
  c.kind = ExperimentKind::differential_test;
  c.family = "gaussian-variance";
  c.family_pre = 1.0;
  c.family_nuisance = 0.0;
  c.rho = 0.01;
  const std::vector<double> grid = {1.5, 1.6, 1.7, 2, 2.1, 2.2, 2.3};
  c.grids = {grid, grid, grid};
  c.lambda_true = {1.7, 2.0, 2.2};
  c.window = 20;
  c.paths = 50;
  c.path_length = 100;
  c.seed = 20160320;
  return c;
}

std::vector<CheckResult> differential_checks(const ExperimentConfig& c) {
  validate_config(c);
  const GeometricPrior prior(c.rho);
  std::vector<CheckResult> results;

  auto rel_err = [](double got, double want) {
    if (got == want) return 0.0;  // covers matching infinities
    return std::fabs(got - want) / std::max(1.0, std::fabs(want));
  };

  // Single sequence: first grid, first truth (or the middle candidate).
  const std::vector<double>& grid = c.grids.front();
  const double truth = c.lambda_true.empty() ? grid[grid.size() / 2] : c.lambda_true.front();
  std::vector<double> named = grid;
  named.push_back(truth);
  const ObservationFamily family = make_family(c, parameter_set(c, named));

  const ChartVariant variants[] = {ChartVariant::shiryaev_roberts, ChartVariant::max_chart,
                                   ChartVariant::sum_chart};
  double err[3] = {0.0, 0.0, 0.0};
  double ordering = 0.0;
  for (std::size_t p = 0; p < c.paths; ++p) {
    const SamplePath path =
        sample_path(family, prior, truth, c.path_length, derive_seed(c.seed, {p}));
    std::vector<ChartBank> banks;
    std::vector<std::vector<std::vector<double>>> traces;
    for (ChartVariant v : variants) {
      banks.emplace_back(family, grid, prior, v, kPosInf);
      traces.push_back(direct_stat_trace(v, path.observations, family, grid, c.rho));
    }
    for (std::size_t n = 0; n < path.observations.size(); ++n) {
      for (std::size_t v = 0; v < 3; ++v) {
        banks[v].step(path.observations[n]);
        for (std::size_t i = 0; i < grid.size(); ++i)
          err[v] = std::max(err[v], rel_err(banks[v].log_stats()[i], traces[v][n][i]));
      }
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = banks[0].log_stats()[i];
        const double m = banks[1].log_stats()[i];
        const double s = banks[2].log_stats()[i];
        ordering = std::max({ordering, s - m, m - r});
      }
    }
  }
  for (std::size_t v = 0; v < 3; ++v)
    results.push_back({fmt::format("recursive-vs-direct/{}", to_string(variants[v])), err[v],
                       1e-9, err[v] <= 1e-9});
  results.push_back({"ordering sum<=max<=sr", ordering, 0.0, ordering <= 0.0});

  // Posterior identity over log-odds spanning pi in (1e-12, 1 - 1e-12).
  double post_err = 0.0;
  for (int j = 0; j <= 2000; ++j) {
    const double log_odds = -27.6 + 55.2 * j / 2000.0;
    const double log_r = log_odds - std::log(c.rho);
    post_err = std::max(post_err, rel_err(stat_from_posterior(posterior_from_stat(log_r, c.rho), c.rho), log_r));
  }
  results.push_back({"posterior round trip", post_err, 1e-9, post_err <= 1e-9});

  // Window engine against exhaustive search over the product set.
  const std::size_t window = c.window.value_or(20);
  std::vector<double> truths;
  for (std::size_t l = 0; l < c.grids.size(); ++l)
    truths.push_back(l < c.lambda_true.size() ? c.lambda_true[l]
                                              : c.grids[l][c.grids[l].size() / 2]);
  const std::vector<SourceSpec> sources = make_sources(c, truths);
  const std::size_t len = std::min<std::size_t>(c.path_length, 100);
  double win_err = 0.0;
  for (std::size_t p = 0; p < c.paths; ++p) {
    const std::uint64_t seed = derive_seed(c.seed, {1000003, p});
    Rng change_rng(derive_seed(seed, {0}));
    const std::uint64_t t = prior.sample(change_rng);
    std::vector<std::vector<double>> paths(sources.size());
    for (std::size_t l = 0; l < sources.size(); ++l) {
      ObservationStream stream(sources[l].family, truths[l], t, derive_seed(seed, {1 + l}));
      for (std::size_t n = 0; n < len; ++n) paths[l].push_back(stream.next());
    }
    const std::vector<double> want = direct_window_trace(sources, paths, c.rho, window);
    WindowEngine engine(sources, prior, window, kPosInf);
    std::vector<double> x(sources.size());
    for (std::size_t n = 0; n < len; ++n) {
      for (std::size_t l = 0; l < sources.size(); ++l) x[l] = paths[l][n];
      engine.window_step(x);
      win_err = std::max(win_err, rel_err(engine.statistic(), want[n]));
    }
  }
  results.push_back({fmt::format("window-vs-exhaustive/L={}", sources.size()), win_err, 1e-9,
                     win_err <= 1e-9});
  return results;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, unsigned workers) {
  validate_config(config);
  ExperimentOutcome out;
  out.config = config;
  out.resolved = to_json(config);

  switch (config.kind) {
    case ExperimentKind::single_sweep: run_single_sweep(out, workers); break;
    case ExperimentKind::epsilon_design: run_epsilon_design(out, workers); break;
    case ExperimentKind::multisource_sweep: run_multisource_sweep(out, workers); break;
    case ExperimentKind::differential_test:
      out.checks = differential_checks(config);
      for (const CheckResult& r : out.checks)
        if (!r.pass) {
          out.valid = false;
          out.notes.push_back("check failed: " + r.name);
        }
      break;
  }
  out.manifest_hash = manifest_hash(out.resolved);
  return out;
}

std::string manifest_hash(const nlohmann::json& resolved) {
  const nlohmann::json core = {{"tool", "mchart"}, {"version", kVersion}, {"config", resolved}};
  const std::string text = core.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("manifest hash: SHA-256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string render_csv(const ExperimentOutcome& o) {
  std::string csv = "# manifest_hash=" + o.manifest_hash + "\n";
  if (o.config.kind == ExperimentKind::differential_test) {
    csv += "check,max_error,tolerance,pass\n";
    for (const CheckResult& r : o.checks)
      csv += fmt::format("{},{},{},{}\n", r.name, fmt_num(r.max_error), fmt_num(r.tolerance),
                         r.pass ? "true" : "false");
    return csv;
  }
  csv += kSweepCsvHeader;
  csv += "\n";
  for (const SweepRow& r : o.rows) {
    std::string lam;
    for (std::size_t l = 0; l < r.lambda_true.size(); ++l)
      lam += (l ? "/" : "") + fmt_num(r.lambda_true[l]);
    const McSummary& s = r.summary;
    csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", fmt_num(r.alpha),
                       fmt_num(r.log_alpha_abs), r.detector, lam, fmt_num(s.add_hat),
                       fmt_num(s.se_add), fmt_num(s.pfa_hat), fmt_num(s.se_pfa),
                       fmt_num(r.lower_bound), fmt_num(r.efficiency), s.censored_count,
                       s.n_runs, r.seed);
  }
  return csv;
}

nlohmann::json render_manifest(const ExperimentOutcome& o) {
  nlohmann::json m;
  m["tool"] = "mchart";
  m["version"] = kVersion;
  m["manifest_hash"] = o.manifest_hash;
  m["config"] = o.resolved;
  m["valid"] = o.valid;
  m["notes"] = o.notes;
  m["outputs"] = {{"csv", "results.csv"}, {"rows", o.config.kind == ExperimentKind::differential_test
                                                       ? o.checks.size()
                                                       : o.rows.size()}};
  nlohmann::json horizons = nlohmann::json::array();
  for (const SweepRow& r : o.rows)
    horizons.push_back({{"detector", r.detector}, {"alpha", r.alpha}, {"horizon_slots", r.horizon}});
  m["horizons"] = horizons;
  return m;
}

void write_outputs(const ExperimentOutcome& o, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "results.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "results.csv").string());
    csv << render_csv(o);
  }
  std::ofstream man(dir / "manifest.json", std::ios::binary);
  if (!man) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  man << render_manifest(o).dump(2) << "\n";
}

}  // namespace mchart
