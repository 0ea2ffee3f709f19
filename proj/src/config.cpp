#include "mchart/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace mchart {

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::single_sweep: return "single-sweep";
    case ExperimentKind::epsilon_design: return "epsilon-design";
    case ExperimentKind::multisource_sweep: return "multisource-sweep";
    case ExperimentKind::differential_test: return "differential-test";
  }
  return "?";
}

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const std::string& l : lines) out += "\n  " + l;
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_any(std::string_view s, std::string_view seps) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t b = s.find_first_not_of(seps, pos);
    if (b == std::string_view::npos) break;
    const std::size_t e = s.find_first_of(seps, b);
    out.push_back(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
    pos = e == std::string_view::npos ? s.size() : e;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

bool parse_size(std::string_view s, std::uint64_t& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_list(std::string_view s, std::vector<double>& out) {
  out.clear();
  for (std::string_view tok : split_any(s, " \t,")) {
    double v = 0.0;
    if (!parse_double(tok, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

// "<n>" or "<n> slots"
bool parse_slots(std::string_view s, std::uint64_t& out) {
  auto toks = split_any(s, " \t");
  if (toks.empty() || toks.size() > 2) return false;
  if (toks.size() == 2 && toks[1] != "slots") return false;
  return parse_size(toks[0], out);
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

const std::set<std::string, std::less<>> kKeys = {
    "name",      "experiment",  "family",      "family.pre", "family.nuisance",
    "lambda.interval", "rho",   "grids",       "detectors",  "lambda_true",
    "alphas",    "runs",        "horizon",     "window",     "window.slack",
    "epsilon",   "mesh",        "lipschitz",   "paths",      "path_length",
    "seed",      "censor_cap",  "output"};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  std::map<std::string, int, std::less<>> seen;

  for (std::string_view raw : split_any(text, "\n")) {
    // split_any drops empty lines, so number lines by source position.
    const auto line_no = std::count(text.data(), raw.data(), '\n') + 1;
    std::string_view line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      problems.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!kKeys.contains(key)) {
      problems.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (seen.contains(key)) {
      problems.push_back(where + "duplicate key '" + key + "' (first on line " +
                         std::to_string(seen[key]) + ")");
      continue;
    }
    seen[key] = static_cast<int>(line_no);
    if (value.empty()) {
      problems.push_back(where + "key '" + key + "' has no value");
      continue;
    }

    auto bad = [&](const char* expect) {
      problems.push_back(where + key + ": expected " + expect + ", got '" + std::string(value) + "'");
    };
    double d = 0.0;
    std::uint64_t u = 0;
    std::vector<double> list;

    if (key == "name") {
      cfg.name = std::string(value);
    } else if (key == "experiment") {
      if (value == "single-sweep") cfg.kind = ExperimentKind::single_sweep;
      else if (value == "epsilon-design") cfg.kind = ExperimentKind::epsilon_design;
      else if (value == "multisource-sweep") cfg.kind = ExperimentKind::multisource_sweep;
      else if (value == "differential-test") cfg.kind = ExperimentKind::differential_test;
      else bad("single-sweep | epsilon-design | multisource-sweep | differential-test");
    } else if (key == "family") {
      cfg.family = std::string(value);
    } else if (key == "family.pre") {
      if (parse_double(value, d)) cfg.family_pre = d; else bad("a number");
    } else if (key == "family.nuisance") {
      if (parse_double(value, d)) cfg.family_nuisance = d; else bad("a number");
    } else if (key == "lambda.interval") {
      if (parse_list(value, list) && list.size() == 2) cfg.lambda_interval = {list[0], list[1]};
      else bad("two numbers 'lo hi'");
    } else if (key == "rho") {
      if (parse_double(value, d)) cfg.rho = d; else bad("a number");
    } else if (key == "grids") {
      cfg.grids.clear();
      for (std::string_view part : split_any(value, ";")) {
        if (!parse_list(part, list)) {
          bad("';'-separated lists of numbers");
          cfg.grids.clear();
          break;
        }
        cfg.grids.push_back(list);
      }
    } else if (key == "detectors") {
      cfg.detectors.clear();
      for (std::string_view tok : split_any(value, " \t,")) cfg.detectors.emplace_back(tok);
    } else if (key == "lambda_true") {
      if (parse_list(value, list)) cfg.lambda_true = list; else bad("a list of numbers");
    } else if (key == "alphas") {
      if (parse_list(value, list)) cfg.alphas = list; else bad("a list of numbers");
    } else if (key == "runs") {
      if (parse_size(value, u)) cfg.runs = u; else bad("a non-negative integer");
    } else if (key == "horizon") {
      if (value == "auto") cfg.horizon.reset();
      else if (parse_slots(value, u)) cfg.horizon = u;
      else bad("'auto' or an integer number of slots");
    } else if (key == "window") {
      if (value == "auto") cfg.window.reset();
      else if (parse_slots(value, u)) cfg.window = u;
      else bad("'auto' or an integer number of slots");
    } else if (key == "window.slack") {
      if (parse_double(value, d)) cfg.window_slack = d; else bad("a number");
    } else if (key == "epsilon") {
      if (parse_double(value, d)) cfg.epsilon = d; else bad("a number");
    } else if (key == "mesh") {
      if (parse_size(value, u)) cfg.mesh = u; else bad("an integer");
    } else if (key == "lipschitz") {
      if (value == "none" || value == "auto" || parse_double(value, d))
        cfg.lipschitz = std::string(value);
      else
        bad("'none', 'auto' or a number");
    } else if (key == "paths") {
      if (parse_size(value, u)) cfg.paths = u; else bad("an integer");
    } else if (key == "path_length") {
      if (parse_slots(value, u)) cfg.path_length = u; else bad("an integer number of slots");
    } else if (key == "seed") {
      if (parse_size(value, u)) cfg.seed = u; else bad("a non-negative integer");
    } else if (key == "censor_cap") {
      if (parse_double(value, d)) cfg.censor_cap = d; else bad("a number");
    } else if (key == "output") {
      cfg.output = std::string(value);
    }
  }
  if (!seen.contains("experiment")) problems.push_back("missing required key 'experiment'");
  if (!problems.empty()) throw ConfigError(std::move(problems));
  validate_config(cfg);
  return cfg;
}

void validate_config(const ExperimentConfig& c) {
  std::vector<std::string> p;
  const bool sweep = c.kind != ExperimentKind::differential_test;

  if (c.family != "gaussian-mean" && c.family != "gaussian-variance")
    p.push_back("family: expected gaussian-mean or gaussian-variance");
  if (c.family == "gaussian-mean" && !(c.family_nuisance > 0.0))
    p.push_back("family.nuisance: sigma must be positive");
  if (c.family == "gaussian-variance" && !(c.family_pre > 0.0))
    p.push_back("family.pre: pre-change sd must be positive");
  if (!(c.rho > 0.0 && c.rho < 1.0)) p.push_back("rho: must lie in (0, 1)");
  if (!(c.censor_cap > 0.0 && c.censor_cap < 1.0)) p.push_back("censor_cap: must lie in (0, 1)");
  if (c.lambda_interval && !(c.lambda_interval->first < c.lambda_interval->second))
    p.push_back("lambda.interval: need lo < hi");

  auto in_interval = [&](double v) {
    return !c.lambda_interval || (v >= c.lambda_interval->first && v <= c.lambda_interval->second);
  };
  for (std::size_t g = 0; g < c.grids.size(); ++g) {
    const auto& grid = c.grids[g];
    if (!strictly_increasing(grid))
      p.push_back("grids: grid " + std::to_string(g + 1) + " must be strictly increasing");
    for (double v : grid) {
      if (!in_interval(v))
        p.push_back("grids: value " + std::to_string(v) + " lies outside lambda.interval");
      if (c.family == "gaussian-variance" && !(v > 0.0))
        p.push_back("grids: gaussian-variance candidates must be positive");
    }
  }
  for (double v : c.lambda_true) {
    if (!in_interval(v))
      p.push_back("lambda_true: value " + std::to_string(v) + " lies outside lambda.interval");
    if (c.family == "gaussian-variance" && !(v > 0.0))
      p.push_back("lambda_true: gaussian-variance parameters must be positive");
  }

  if (sweep) {
    if (c.alphas.empty()) p.push_back("alphas: empty alpha list");
    for (double a : c.alphas)
      if (!(a > 0.0 && a <= 1.0)) p.push_back("alphas: each alpha must lie in (0, 1]");
    if (!strictly_increasing(std::vector<double>(c.alphas.rbegin(), c.alphas.rend())))
      p.push_back("alphas: must be strictly decreasing");
    if (c.runs == 0) p.push_back("runs: must be >= 1");
    if (c.horizon && *c.horizon == 0) p.push_back("horizon: must be >= 1 slot");
  }

  switch (c.kind) {
    case ExperimentKind::single_sweep:
      if (c.grids.empty()) p.push_back("grids: at least one candidate grid required");
      if (c.lambda_true.empty()) p.push_back("lambda_true: required");
      if (c.detectors.empty()) p.push_back("detectors: at least one detector required");
      for (const std::string& d : c.detectors)
        if (d != "msr" && d != "mmsr" && d != "sum")
          p.push_back("detectors: unknown detector '" + d + "' (msr | mmsr | sum)");
      break;
    case ExperimentKind::epsilon_design:
      if (!c.lambda_interval) p.push_back("lambda.interval: required for epsilon-design");
      if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) p.push_back("epsilon: must lie in (0, 1)");
      if (c.mesh < 2) p.push_back("mesh: need at least 2 points");
      if (c.lipschitz == "auto" && c.family != "gaussian-mean")
        p.push_back("lipschitz: 'auto' is only available for gaussian-mean");
      if (c.lipschitz != "none" && c.lipschitz != "auto") {
        double k = 0.0;
        if (!parse_double(c.lipschitz, k) || !(k > 0.0))
          p.push_back("lipschitz: constant must be a positive number");
      }
      break;
    case ExperimentKind::multisource_sweep:
      if (c.grids.empty()) p.push_back("grids: one grid per source required");
      if (c.lambda_true.size() != c.grids.size())
        p.push_back("lambda_true: need exactly one true parameter per source");
      if (!c.window && !(c.window_slack > 1.0)) p.push_back("window.slack: must exceed 1");
      if (c.window && *c.window == 0) p.push_back("window: must be >= 1 slot");
      break;
    case ExperimentKind::differential_test:
      if (c.grids.empty()) p.push_back("grids: at least one grid required");
      if (c.paths == 0) p.push_back("paths: must be >= 1");
      if (c.path_length == 0 || c.path_length > 500)
        p.push_back("path_length: must lie in [1, 500]");
      break;
  }
  if (!p.empty()) throw ConfigError(std::move(p));
}

std::string preset_text(std::string_view name) {
  if (name == "fig4")
    return R"(# Single sequence, gaussian mean shift, two candidate grids.
name = fig4
experiment = single-sweep
family = gaussian-mean
family.pre = 0
family.nuisance = 1
lambda.interval = 0.4 2.8
rho = 0.01
grids = 0.4 1.6 2.8 ; 0.4 1 1.6 2.2 2.8
detectors = msr mmsr
lambda_true = 1
alphas = 0.1 0.01 0.001 0.0001
runs = 10000
horizon = auto
seed = 1
)";
  if (name == "fig5")
    return R"(# Three independent sources, gaussian variance shift N(0,1) -> N(0, lambda^2).
name = fig5
experiment = multisource-sweep
family = gaussian-variance
family.pre = 1
family.nuisance = 0
rho = 0.01
grids = 1.5 1.6 1.7 2 2.1 2.2 2.3 ; 1.5 1.6 1.7 2 2.1 2.2 2.3 ; 1.5 1.6 1.7 2 2.1 2.2 2.3
lambda_true = 1.7 2 2.2
window = 200 slots
alphas = 0.1 0.01 0.001
runs = 10000
horizon = auto
seed = 1
)";
  if (name == "example1")
    return R"(# Epsilon-optimal grid design for a gaussian mean shift.
name = example1
experiment = epsilon-design
family = gaussian-mean
family.pre = 0
family.nuisance = 1
lambda.interval = 0.37 2.63
rho = 0.01
epsilon = 0.2
mesh = 1000
lipschitz = none
detectors = msr
alphas = 0.001
runs = 10000
horizon = auto
seed = 1
)";
  throw ConfigError({"unknown preset '" + std::string(name) + "' (fig4 | fig5 | example1)"});
}

ExperimentConfig preset_config(std::string_view name) { return parse_config(preset_text(name)); }

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["experiment"] = to_string(c.kind);
  j["family"] = {{"kind", c.family}, {"pre", c.family_pre}, {"nuisance", c.family_nuisance}};
  if (c.lambda_interval)
    j["lambda_interval"] = {c.lambda_interval->first, c.lambda_interval->second};
  else
    j["lambda_interval"] = nullptr;
  j["rho"] = c.rho;
  j["grids"] = c.grids;
  j["detectors"] = c.detectors;
  j["lambda_true"] = c.lambda_true;
  j["alphas"] = c.alphas;
  j["runs"] = c.runs;
  j["horizon_slots"] = c.horizon ? nlohmann::json(*c.horizon) : nlohmann::json("auto");
  j["window_slots"] = c.window ? nlohmann::json(*c.window) : nlohmann::json("auto");
  j["window_slack"] = c.window_slack;
  j["epsilon"] = c.epsilon;
  j["mesh"] = c.mesh;
  j["lipschitz"] = c.lipschitz;
  j["paths"] = c.paths;
  j["path_length"] = c.path_length;
  j["seed"] = c.seed;
  j["censor_cap"] = c.censor_cap;
  return j;
}

}  // namespace mchart
