#pragma once
// Experiment layer: a flat key-value description of one training run, named
// presets for the catalog problems, reference-solution selection, and the
// artifact set a run leaves on disk. A run directory always holds the fully
// resolved configuration it was produced from, so any run can be repeated
// bit for bit from its own artifacts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tsnn/common.hpp"
#include "tsnn/metrics.hpp"
#include "tsnn/network.hpp"
#include "tsnn/problem.hpp"
#include "tsnn/refsolve.hpp"
#include "tsnn/rng.hpp"
#include "tsnn/training.hpp"

namespace tsnn {

// ----- configuration -----

/// One run, direct or staged. Iteration budgets are stored at full size;
/// budget_scale shrinks them only when the run executes, so a desk-scale run
/// and a full run share one configuration.
struct ExperimentConfig {
  std::string problem;
  std::map<std::string, double> args;  // named problem parameters
  EffectiveEpsilon epsilon;

  std::vector<int> widths;  // empty until resolve(); then input dim first
  FeatureMode features = FeatureMode::TwoScale;
  double gamma = -0.5;
  double tau_c = 0.5;

  TrainConfig train;  // the seed field is unused; run_seed rules

  std::vector<double> curriculum_values;  // continued-parameter values; empty = direct
  std::vector<StageOverride> stage_overrides;
  bool small_eps_lr = true;

  std::uint64_t run_seed = 0;
  double budget_scale = 1.0;
  int grid = 1001;
  std::string out;  // empty defers to TSNN_OUT_ROOT, then ./runs

  bool is_curriculum() const { return !curriculum_values.empty(); }

  /// Fills defaulted widths and validates every cross-field constraint,
  /// including that each stage problem is constructible.
  void resolve();
};

namespace detail {

inline const ProblemInfo& catalog_info(const std::string& name) {
  static const std::vector<ProblemInfo> catalog = problem_catalog();
  for (const ProblemInfo& info : catalog)
    if (info.name == name) return info;
  throw ConfigError("unknown problem '" + name + "'");
}

inline long parse_long(const std::string& s) {
  if (s.empty()) throw ConfigError("empty integer token");
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size())
    throw ConfigError("malformed integer token '" + s + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
  if (s.empty() || s[0] == '-') throw ConfigError("malformed seed token '" + s + "'");
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size())
    throw ConfigError("malformed seed token '" + s + "'");
  return v;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

/// Learning-rate grammar: "piecewise" alone is the default scheduler,
/// "fixed <rate>" a constant, and "piecewise <bound>:<rate>... tail:<rate>"
/// spells a table out. LrSchedule::describe() emits the spelled-out forms.
inline LrSchedule parse_lr(const std::string& text) {
  const auto toks = detail::split_ws(text);
  if (toks.empty()) throw ConfigError("empty learning-rate value");
  if (toks[0] == "fixed") {
    if (toks.size() != 2) throw ConfigError("fixed learning rate takes one rate");
    return LrSchedule::fixed(parse_double(toks[1]));
  }
  if (toks[0] != "piecewise")
    throw ConfigError("learning rate must start with 'fixed' or 'piecewise'");
  if (toks.size() == 1) return LrSchedule::piecewise_default();
  LrSchedule s;
  bool saw_tail = false;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const auto colon = toks[i].find(':');
    if (colon == std::string::npos)
      throw ConfigError("piecewise entry '" + toks[i] + "' lacks a colon");
    const std::string head = toks[i].substr(0, colon);
    const double rate = parse_double(toks[i].substr(colon + 1));
    if (head == "tail") {
      if (i + 1 != toks.size()) throw ConfigError("tail rate must come last");
      s.tail = rate;
      saw_tail = true;
    } else {
      s.bounds.push_back(detail::parse_long(head));
      s.rates.push_back(rate);
    }
  }
  if (!saw_tail) throw ConfigError("piecewise table needs a closing tail:<rate>");
  s.validate();
  return s;
}

/// Parses the flat key = value text. '#' starts a comment, blank lines are
/// skipped, unknown and repeated keys are rejected.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  bool saw_eps_value = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    if (!seen.insert(key).second)
      throw ConfigError("repeated key '" + key + "'");

    if (key == "problem.name") {
      cfg.problem = value;
    } else if (key.rfind("problem.", 0) == 0) {
      cfg.args[key.substr(8)] = parse_double(value);
    } else if (key == "epsilon.mode") {
      if (value == "geometric-mean") cfg.epsilon.mode = EffectiveEpsilon::Mode::GeometricMean;
      else if (value == "smallest") cfg.epsilon.mode = EffectiveEpsilon::Mode::Smallest;
      else if (value == "fixed") cfg.epsilon.mode = EffectiveEpsilon::Mode::Fixed;
      else throw ConfigError("unknown epsilon mode '" + value + "'");
    } else if (key == "epsilon.value") {
      cfg.epsilon.fixed = parse_double(value);
      saw_eps_value = true;
    } else if (key == "network.widths") {
      for (const auto& tok : detail::split_ws(value))
        cfg.widths.push_back(static_cast<int>(detail::parse_long(tok)));
    } else if (key == "network.features") {
      if (value == "two-scale") cfg.features = FeatureMode::TwoScale;
      else if (value == "vanilla") cfg.features = FeatureMode::Vanilla;
      else throw ConfigError("unknown feature mode '" + value + "'");
    } else if (key == "network.gamma") {
      cfg.gamma = parse_double(value);
    } else if (key == "network.tau_c") {
      cfg.tau_c = parse_double(value);
    } else if (key == "train.alpha") {
      cfg.train.alpha = parse_double(value);
    } else if (key == "train.n_collocation") {
      cfg.train.n_collocation = static_cast<int>(detail::parse_long(value));
    } else if (key == "train.n_boundary") {
      cfg.train.n_boundary = static_cast<int>(detail::parse_long(value));
    } else if (key == "train.lr") {
      cfg.train.lr = parse_lr(value);
    } else if (key == "train.iterations") {
      cfg.train.iterations = detail::parse_long(value);
    } else if (key == "train.resample") {
      if (value == "per-stage") cfg.train.resample = Resample::PerStage;
      else if (value == "per-iteration") cfg.train.resample = Resample::PerIteration;
      else throw ConfigError("unknown resample policy '" + value + "'");
    } else if (key == "curriculum.values") {
      for (const auto& tok : detail::split_ws(value))
        cfg.curriculum_values.push_back(parse_double(tok));
    } else if (key == "curriculum.small_eps_lr") {
      if (value == "on") cfg.small_eps_lr = true;
      else if (value == "off") cfg.small_eps_lr = false;
      else throw ConfigError("curriculum.small_eps_lr must be on or off");
    } else if (key.rfind("curriculum.stage", 0) == 0) {
      const std::string rest = key.substr(16);
      const auto dot = rest.find('.');
      if (dot == std::string::npos || dot == 0)
        throw ConfigError("malformed stage key '" + key + "'");
      const long idx = detail::parse_long(rest.substr(0, dot));
      if (idx < 0 || idx > 1000) throw ConfigError("stage index out of range in '" + key + "'");
      if (cfg.stage_overrides.size() <= static_cast<std::size_t>(idx))
        cfg.stage_overrides.resize(idx + 1);
      StageOverride& ov = cfg.stage_overrides[idx];
      const std::string field = rest.substr(dot + 1);
      if (field == "alpha") ov.alpha = parse_double(value);
      else if (field == "n_collocation") ov.n_collocation = static_cast<int>(detail::parse_long(value));
      else if (field == "lr") ov.lr = parse_lr(value);
      else if (field == "iterations") ov.iterations = detail::parse_long(value);
      else throw ConfigError("unknown stage field '" + field + "'");
    } else if (key == "run.seed") {
      cfg.run_seed = detail::parse_u64(value);
    } else if (key == "run.budget_scale") {
      cfg.budget_scale = parse_double(value);
    } else if (key == "run.grid") {
      cfg.grid = static_cast<int>(detail::parse_long(value));
    } else if (key == "run.out") {
      cfg.out = value;
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  if (cfg.epsilon.mode != EffectiveEpsilon::Mode::Fixed && saw_eps_value)
    throw ConfigError("epsilon.value requires epsilon.mode = fixed");
  if (cfg.problem.empty()) throw ConfigError("missing problem.name");
  return cfg;
}

/// Canonical text form: every field explicit, keys in a fixed order, numbers
/// in shortest round-trip decimal. parse_config inverts it exactly. The out
/// path is location rather than content and is omitted.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream s;
  s << "problem.name = " << cfg.problem << "\n";
  for (const auto& [k, v] : cfg.args) s << "problem." << k << " = " << fmt_double(v) << "\n";
  s << "epsilon.mode = "
    << (cfg.epsilon.mode == EffectiveEpsilon::Mode::GeometricMean ? "geometric-mean"
        : cfg.epsilon.mode == EffectiveEpsilon::Mode::Smallest    ? "smallest"
                                                                  : "fixed")
    << "\n";
  if (cfg.epsilon.mode == EffectiveEpsilon::Mode::Fixed)
    s << "epsilon.value = " << fmt_double(cfg.epsilon.fixed) << "\n";
  if (!cfg.widths.empty()) {
    s << "network.widths =";
    for (int w : cfg.widths) s << ' ' << w;
    s << "\n";
  }
  s << "network.features = "
    << (cfg.features == FeatureMode::TwoScale ? "two-scale" : "vanilla") << "\n";
  s << "network.gamma = " << fmt_double(cfg.gamma) << "\n";
  s << "network.tau_c = " << fmt_double(cfg.tau_c) << "\n";
  s << "train.alpha = " << fmt_double(cfg.train.alpha) << "\n";
  s << "train.n_collocation = " << cfg.train.n_collocation << "\n";
  s << "train.n_boundary = " << cfg.train.n_boundary << "\n";
  s << "train.lr = " << cfg.train.lr.describe() << "\n";
  s << "train.iterations = " << cfg.train.iterations << "\n";
  s << "train.resample = "
    << (cfg.train.resample == Resample::PerStage ? "per-stage" : "per-iteration") << "\n";
  if (!cfg.curriculum_values.empty()) {
    s << "curriculum.values =";
    for (double v : cfg.curriculum_values) s << ' ' << fmt_double(v);
    s << "\n";
    s << "curriculum.small_eps_lr = " << (cfg.small_eps_lr ? "on" : "off") << "\n";
    for (std::size_t k = 0; k < cfg.stage_overrides.size(); ++k) {
      const StageOverride& ov = cfg.stage_overrides[k];
      const std::string p = "curriculum.stage" + std::to_string(k) + ".";
      if (ov.alpha) s << p << "alpha = " << fmt_double(*ov.alpha) << "\n";
      if (ov.n_collocation) s << p << "n_collocation = " << *ov.n_collocation << "\n";
      if (ov.lr) s << p << "lr = " << ov.lr->describe() << "\n";
      if (ov.iterations) s << p << "iterations = " << *ov.iterations << "\n";
    }
  }
  s << "run.seed = " << cfg.run_seed << "\n";
  s << "run.budget_scale = " << fmt_double(cfg.budget_scale) << "\n";
  s << "run.grid = " << cfg.grid << "\n";
  return s.str();
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

inline void ExperimentConfig::resolve() {
  const ProblemInfo& info = detail::catalog_info(problem);
  if (widths.empty()) {
    widths = {feature_dim(features), 10, 10, 10, 10, info.n};
  }
  if (widths.size() < 2) throw ConfigError("network needs at least two layers");
  if (widths.front() != feature_dim(features))
    throw ConfigError("first width " + std::to_string(widths.front()) +
                      " does not match feature dimension " +
                      std::to_string(feature_dim(features)));
  if (widths.back() != info.n)
    throw ConfigError("last width " + std::to_string(widths.back()) +
                      " does not match problem dimension " + std::to_string(info.n));
  TwoScaleConfig{1.0, gamma, tau_c}.validate();
  train.validate();
  if (!(budget_scale > 0.0)) throw ConfigError("run.budget_scale must be positive");
  if (grid < 100) throw ConfigError("run.grid must be at least 100 points");
  if (epsilon.mode == EffectiveEpsilon::Mode::Fixed && !(epsilon.fixed > 0.0))
    throw ConfigError("epsilon.value must be positive");

  if (is_curriculum()) {
    if (info.required.size() != 1)
      throw ConfigError("problem '" + problem + "' has no single continued parameter");
    const std::string& key = info.required.front();
    if (args.count(key))
      throw ConfigError("problem." + key + " is continued by the curriculum; remove it");
    if (stage_overrides.size() > curriculum_values.size())
      throw ConfigError("stage override index exceeds the stage count");
    double prev = 0.0;
    for (std::size_t k = 0; k < curriculum_values.size(); ++k) {
      auto a = args;
      a[key] = curriculum_values[k];
      const ProblemSpec p = make_problem(problem, a);
      const double eff = epsilon.resolve(p.eps_vec);
      if (k > 0 && !(eff < prev))
        throw ConfigError("curriculum: effective eps sequence must be strictly decreasing");
      prev = eff;
    }
  } else {
    (void)make_problem(problem, args);
  }
}

// ----- presets -----

namespace detail {

inline void push_stage(ExperimentConfig& cfg, double value, double alpha, int n_c,
                       LrSchedule lr, long iterations) {
  cfg.curriculum_values.push_back(value);
  StageOverride ov;
  ov.alpha = alpha;
  ov.n_collocation = n_c;
  ov.lr = std::move(lr);
  ov.iterations = iterations;
  cfg.stage_overrides.push_back(std::move(ov));
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"mm-curriculum",          "bvp-curriculum",
          "robertson-curriculum",   "fhn-curriculum",
          "fhn-direct-1e-2-8",      "fhn-direct-1e-2-8-vanilla",
          "robertson-direct-geomean", "robertson-direct-smallest",
          "robertson-direct-vanilla"};
}

/// Named study configurations at full iteration budgets; all carry
/// budget_scale 0.1 so the default invocation finishes at desk scale.
/// Passing budget_scale 1 restores the full budgets.
inline ExperimentConfig preset(const std::string& name) {
  const LrSchedule ps = LrSchedule::piecewise_default();
  const LrSchedule f4 = LrSchedule::fixed(1e-4);
  ExperimentConfig cfg;
  cfg.budget_scale = 0.1;
  if (name == "mm-curriculum") {
    // Enzyme-kinetics continuation from eps 1e-1 down to 1.25e-5.
    cfg.problem = "mm-ivp";
    detail::push_stage(cfg, 1e-1, 1.0, 300, ps, 30000);
    detail::push_stage(cfg, 1e-2, 1.0, 300, ps, 60000);
    detail::push_stage(cfg, 1e-3, 1.0, 450, ps, 60000);
    detail::push_stage(cfg, 1e-4, 1.0, 450, f4, 60000);
    detail::push_stage(cfg, 5e-5, 1.0, 450, f4, 35000);
    detail::push_stage(cfg, 2.5e-5, 1.0, 450, f4, 35000);
    detail::push_stage(cfg, 1.25e-5, 1.0, 450, f4, 35000);
  } else if (name == "bvp-curriculum") {
    // Second-order two-point problem, eps 1e-1 down to 1e-5.
    cfg.problem = "linear-bvp";
    cfg.train.alpha = 100.0;
    detail::push_stage(cfg, 1e-1, 100.0, 300, ps, 30000);
    detail::push_stage(cfg, 1e-2, 100.0, 300, f4, 60000);
    detail::push_stage(cfg, 1e-3, 100.0, 450, f4, 60000);
    detail::push_stage(cfg, 1e-4, 100.0, 450, f4, 60000);
    detail::push_stage(cfg, 1e-5, 100.0, 450, f4, 60000);
  } else if (name == "robertson-curriculum") {
    // Continuation in the fast rate constant k2 from 10 to 100.
    cfg.problem = "robertson";
    cfg.train.alpha = 1e4;
    detail::push_stage(cfg, 10.0, 1e4, 300, ps, 50000);
    detail::push_stage(cfg, 50.0, 1e4, 300, ps, 50000);
    detail::push_stage(cfg, 60.0, 1e4, 300, f4, 50000);
    detail::push_stage(cfg, 100.0, 1e4, 300, f4, 70000);
  } else if (name == "fhn-curriculum") {
    // Excitable system, eps2 walked 1e-2 down to 2.5e-4 while eps1 and eps3
    // stay at their defaults.
    cfg.problem = "fhn";
    cfg.train.alpha = 1000.0;
    detail::push_stage(cfg, 1e-2, 1000.0, 450, ps, 50000);
    detail::push_stage(cfg, 2.5e-3, 1000.0, 450, f4, 50000);
    detail::push_stage(cfg, 1.25e-3, 1000.0, 450, f4, 50000);
    detail::push_stage(cfg, 6.25e-4, 1000.0, 450, f4, 50000);
    detail::push_stage(cfg, 3.125e-4, 1000.0, 450, f4, 150000);
    detail::push_stage(cfg, 2.5e-4, 1000.0, 450, f4, 150000);
  } else if (name == "fhn-direct-1e-2-8" || name == "fhn-direct-1e-2-8-vanilla") {
    // Single-stage solve at eps2 = 1e-2/8, the high-contrast regime used to
    // compare the stretched features against the bare-input baseline.
    cfg.problem = "fhn";
    cfg.args["eps2"] = 1.25e-3;
    cfg.train.alpha = 1000.0;
    cfg.train.n_collocation = 450;
    cfg.train.lr = ps;
    cfg.train.iterations = 50000;
    if (name == "fhn-direct-1e-2-8-vanilla") cfg.features = FeatureMode::Vanilla;
  } else if (name == "robertson-direct-geomean" || name == "robertson-direct-smallest" ||
             name == "robertson-direct-vanilla") {
    // Single-stage solve at k2 = 10 under the three stretch-parameter
    // choices: per-equation geometric mean, smallest parameter, none.
    cfg.problem = "robertson";
    cfg.args["k2"] = 10.0;
    cfg.train.alpha = 1e4;
    cfg.train.n_collocation = 300;
    cfg.train.lr = ps;
    cfg.train.iterations = 50000;
    if (name == "robertson-direct-smallest") cfg.epsilon.mode = EffectiveEpsilon::Mode::Smallest;
    if (name == "robertson-direct-vanilla") cfg.features = FeatureMode::Vanilla;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  cfg.resolve();
  return cfg;
}

// ----- reference solutions -----

struct ReferenceInfo {
  std::string method;  // "exact", "rk4" or "radau5"
  double h = 0.0;
  double rtol = 0.0;
  double atol = 0.0;
  double h0 = 0.0;
};

struct ReferenceSolution {
  ReferenceInfo info;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // component-major
};

namespace detail {

inline std::vector<double> initial_state(const ProblemSpec& p) {
  std::vector<double> u0(p.n, 0.0);
  std::vector<bool> set(p.n, false);
  for (const BoundaryCondition& bc : p.conditions) {
    if (bc.tau != 0.0)
      throw ConfigError("reference: problem '" + p.name + "' is not an initial-value problem");
    u0[bc.component] = bc.value;
    set[bc.component] = true;
  }
  for (int c = 0; c < p.n; ++c)
    if (!set[c])
      throw ConfigError("reference: no initial value for component " + std::to_string(c));
  return u0;
}

inline std::vector<std::vector<double>> split_components(const std::vector<double>& flat,
                                                         std::size_t n_times, int n) {
  std::vector<std::vector<double>> out(n, std::vector<double>(n_times));
  for (std::size_t i = 0; i < n_times; ++i)
    for (int c = 0; c < n; ++c) out[c][i] = flat[i * n + c];
  return out;
}

}  // namespace detail

/// Trajectory the error report compares against: the closed form when the
/// problem has one, fixed-step RK4 for the smooth enzyme system, Radau
/// otherwise. Tolerances keep the reference error far below trained-network
/// error.
inline ReferenceSolution reference_solution(const ProblemSpec& p, std::span<const double> times) {
  ReferenceSolution ref;
  ref.times.assign(times.begin(), times.end());
  if (p.exact) {
    ref.info.method = "exact";
    ref.values.assign(p.n, std::vector<double>(times.size()));
    std::vector<double> u(p.n);
    for (std::size_t i = 0; i < times.size(); ++i) {
      p.exact(times[i], u);
      for (int c = 0; c < p.n; ++c) ref.values[c][i] = u[c];
    }
    return ref;
  }
  const OdeField field = OdeField::from_problem(p);
  const std::vector<double> u0 = detail::initial_state(p);
  if (p.name == "mm-ivp") {
    ref.info.method = "rk4";
    ref.info.h = 1e-5;
    const GridSolution g = rk4_solve(field, u0, ref.info.h);
    ref.values = detail::split_components(sample_at(g, times), times.size(), p.n);
    return ref;
  }
  RadauOptions opts;
  double eps_min = p.eps_vec.empty() ? 1.0 : p.eps_vec[0];
  for (double e : p.eps_vec) eps_min = std::min(eps_min, e);
  opts.h0 = std::min(1e-6, eps_min / 10.0);
  ref.info.method = "radau5";
  ref.info.rtol = opts.rtol;
  ref.info.atol = opts.atol;
  ref.info.h0 = opts.h0;
  const GridSolution g = radau5_solve(field, u0, opts);
  ref.values = detail::split_components(sample_at(g, times), times.size(), p.n);
  return ref;
}

// ----- evaluation -----

inline std::vector<double> uniform_grid(int n) {
  if (n < 2) throw ConfigError("evaluation grid needs at least two points");
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = static_cast<double>(i) / (n - 1);
  return t;
}

/// Network values on a time grid, component-major.
inline std::vector<std::vector<double>> sample_network(const NetworkParams& params,
                                                       const TwoScaleConfig& scale,
                                                       FeatureMode mode,
                                                       std::span<const double> times) {
  std::vector<std::vector<double>> out(params.outputs(),
                                       std::vector<double>(times.size()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto u = forward(params, lift_input(times[i]), scale, mode);
    for (std::size_t c = 0; c < u.size(); ++c) out[c][i] = u[c].v;
  }
  return out;
}

/// Smallest power of ten that lifts the component's peak magnitude to at
/// least 0.3, so the scaled error tracks digits of the visible curve. Exact
/// zeros stop at the cap.
inline int auto_scale_exponent(double max_abs) {
  int m = 0;
  double scaled = max_abs;
  while (m < 12 && scaled < 0.3) {
    scaled *= 10.0;
    ++m;
  }
  return m;
}

inline std::vector<std::string> component_names(const std::string& problem, int n) {
  if (problem == "mm-ivp" || problem == "linear-bvp") return {"u", "v"};
  if (problem == "robertson") return {"y", "z"};
  if (problem == "fhn") return {"v", "z", "w"};
  std::vector<std::string> names(n);
  for (int c = 0; c < n; ++c) names[c] = "c" + std::to_string(c);
  return names;
}

// ----- run execution -----

/// Stored budgets shrink to the executed budgets; any positive budget stays
/// at least one iteration so every stage leaves a loss record.
inline long scaled_iterations(long full, double scale) {
  if (full <= 0) return 0;
  return std::max<long>(1, std::llround(static_cast<double>(full) * scale));
}

inline std::string out_root() {
  if (const char* env = std::getenv("TSNN_OUT_ROOT"); env && *env) return env;
  return "runs";
}

struct ExperimentResult {
  ExperimentConfig config;  // resolved form
  RunReport report;
  ErrorReport errors;
  std::vector<std::string> names;
  ReferenceInfo reference;
  double evaluated_at = 0.0;  // continued-parameter value of the last stage run
  std::string out_dir;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("short write on '" + path.string() + "'");
}

inline void write_loss_history(const std::filesystem::path& path,
                               const std::vector<LossRecord>& history) {
  std::ostringstream s;
  s << "iteration,stage,lr,loss\n";
  for (const LossRecord& r : history)
    s << r.iteration << ',' << r.stage << ',' << fmt_double(r.lr) << ','
      << fmt_double(r.loss) << "\n";
  write_text(path, s.str());
}

inline nlohmann::json metrics_json(const ExperimentResult& res, bool with_training) {
  nlohmann::json j;
  j["problem"] = res.config.problem;
  j["grid_points"] = res.config.grid;
  j["l2_convention"] = res.errors.l2_convention;
  j["evaluated_at"] = res.evaluated_at;
  j["effective_epsilon"] = res.report.stages.back().effective_eps;
  if (with_training) {
    j["training"] = {{"final_loss", res.report.stages.back().final_loss},
                     {"diverged", res.report.diverged},
                     {"stages", res.report.stages.size()},
                     {"iterations", res.report.history.size()}};
  }
  j["components"] = nlohmann::json::array();
  for (std::size_t c = 0; c < res.errors.components.size(); ++c) {
    const ComponentError& ce = res.errors.components[c];
    double rel_linf = 0.0;
    for (double r : ce.rel_err) rel_linf = std::max(rel_linf, r);
    j["components"].push_back({{"name", res.names[c]},
                               {"scale_exponent", ce.scale_exponent},
                               {"linf", ce.linf},
                               {"l2", ce.l2},
                               {"linf_scaled", ce.linf_scaled},
                               {"l2_scaled", ce.l2_scaled},
                               {"rel_linf", rel_linf}});
  }
  return j;
}

inline nlohmann::json reference_json(const ReferenceInfo& info) {
  nlohmann::json j{{"method", info.method}};
  if (info.method == "rk4") j["h"] = info.h;
  if (info.method == "radau5") {
    j["rtol"] = info.rtol;
    j["atol"] = info.atol;
    j["h0"] = info.h0;
  }
  return j;
}

}  // namespace detail

/// Trains per the configuration, evaluates the final parameters against the
/// reference on the run's grid and writes the artifact set into out_dir (the
/// config's own out when set, else <out root>/<run_name>). A diverged run
/// still writes everything; its evaluation targets the last stage reached.
inline ExperimentResult run_experiment(ExperimentConfig cfg, const std::string& run_name) {
  namespace fs = std::filesystem;
  cfg.resolve();
  ExperimentResult res;
  res.out_dir = cfg.out.empty() ? out_root() + "/" + run_name : cfg.out;

  TrainConfig base = cfg.train;
  base.iterations = scaled_iterations(base.iterations, cfg.budget_scale);

  if (cfg.is_curriculum()) {
    CurriculumProblem cp = curriculum_problem(cfg.problem, cfg.args, cfg.epsilon);
    CurriculumSchedule sched;
    sched.explicit_values = cfg.curriculum_values;
    sched.small_eps_lr_rule = cfg.small_eps_lr;
    sched.overrides = cfg.stage_overrides;
    for (StageOverride& ov : sched.overrides)
      if (ov.iterations) ov.iterations = scaled_iterations(*ov.iterations, cfg.budget_scale);
    base.seed = cfg.run_seed;
    res.report = curriculum_train(cp, sched, base, cfg.widths, cfg.features, cfg.gamma,
                                  cfg.tau_c);
    res.evaluated_at = res.report.stages.back().stage_value;
  } else {
    const ProblemSpec p = make_problem(cfg.problem, cfg.args);
    const double eff = cfg.epsilon.resolve(p.eps_vec);
    const TwoScaleConfig scale{eff, cfg.gamma, cfg.tau_c};
    // Seeds split exactly as a one-stage curriculum would split them.
    base.seed = derive_seed(cfg.run_seed, "colloc", 0);
    const NetworkParams p0 =
        init_xavier(cfg.widths, derive_seed(cfg.run_seed, "init"), cfg.features);
    res.report = train_stage(p, scale, cfg.features, base, p0);
    // Report the continued parameter as the stage value when the problem has
    // one, matching what a one-stage curriculum would record.
    const ProblemInfo& info = detail::catalog_info(cfg.problem);
    if (info.required.size() == 1)
      if (auto it = cfg.args.find(info.required.front()); it != cfg.args.end())
        res.report.stages.back().stage_value = it->second;
    res.evaluated_at = res.report.stages.back().stage_value;
  }
  res.config = cfg;

  // Evaluation against the problem of the last stage actually reached.
  ProblemSpec eval_problem;
  if (cfg.is_curriculum()) {
    const ProblemInfo& info = detail::catalog_info(cfg.problem);
    auto a = cfg.args;
    a[info.required.front()] = res.report.stages.back().stage_value;
    eval_problem = make_problem(cfg.problem, a);
  } else {
    eval_problem = make_problem(cfg.problem, cfg.args);
  }
  const std::vector<double> times = uniform_grid(cfg.grid);
  ReferenceSolution ref = reference_solution(eval_problem, times);
  res.reference = ref.info;
  const TwoScaleConfig eval_scale{res.report.stages.back().effective_eps, cfg.gamma,
                                  cfg.tau_c};
  auto nn = sample_network(res.report.final_params, eval_scale, cfg.features, times);
  std::vector<int> exps(eval_problem.n, 0);
  for (int c = 0; c < eval_problem.n; ++c) {
    double mx = 0.0;
    for (double v : ref.values[c]) mx = std::max(mx, std::abs(v));
    exps[c] = auto_scale_exponent(mx);
  }
  res.errors = error_report(std::move(nn), std::move(ref.values), times, exps);
  res.names = component_names(cfg.problem, eval_problem.n);

  // Artifacts.
  fs::create_directories(res.out_dir);
  const fs::path dir(res.out_dir);
  detail::write_text(dir / "config.resolved.cfg", serialize_config(cfg));
  detail::write_loss_history(dir / "loss_history.csv", res.report.history);
  for (const StageResult& sr : res.report.stages) {
    const TwoScaleConfig sc{sr.effective_eps, cfg.gamma, cfg.tau_c};
    save_checkpoint((dir / ("stage-" + std::to_string(sr.stage) + ".ckpt")).string(),
                    {sr.params, cfg.features, sc, cfg.run_seed});
  }
  save_checkpoint((dir / "final.ckpt").string(),
                  {res.report.final_params, cfg.features, eval_scale, cfg.run_seed});
  write_error_csv((dir / "errors.csv").string(), res.errors, res.names);
  detail::write_text(dir / "metrics.json", detail::metrics_json(res, true).dump(2) + "\n");

  nlohmann::json man;
  man["format"] = "tsnn-run 1";
  man["config"] = "config.resolved.cfg";
  man["problem"] = {{"name", eval_problem.name},
                    {"n", eval_problem.n},
                    {"order", eval_problem.order},
                    {"params", eval_problem.params}};
  man["network"] = {{"widths", cfg.widths},
                    {"features", cfg.features == FeatureMode::TwoScale ? "two-scale" : "vanilla"},
                    {"gamma", cfg.gamma},
                    {"tau_c", cfg.tau_c},
                    {"param_count", res.report.final_params.theta.size()}};
  man["seed"] = cfg.run_seed;
  man["budget_scale"] = cfg.budget_scale;
  man["grid_points"] = cfg.grid;
  man["reference"] = detail::reference_json(res.reference);
  man["diverged"] = res.report.diverged;
  man["stages"] = nlohmann::json::array();
  for (const StageResult& sr : res.report.stages) {
    nlohmann::json js{{"index", sr.stage},
                      {"value", sr.stage_value},
                      {"effective_eps", sr.effective_eps},
                      {"alpha", sr.cfg.alpha},
                      {"n_collocation", sr.cfg.n_collocation},
                      {"lr", sr.cfg.lr.describe()},
                      {"iterations_run", sr.cfg.iterations},
                      {"initial_loss", sr.initial_loss},
                      {"final_loss", sr.final_loss},
                      {"diverged", sr.diverged}};
    if (sr.diverged) js["diverged_at"] = sr.diverged_at;
    man["stages"].push_back(std::move(js));
  }
  man["artifacts"] = {"config.resolved.cfg", "loss_history.csv", "errors.csv",
                      "metrics.json", "final.ckpt"};
  detail::write_text(dir / "manifest.json", man.dump(2) + "\n");
  return res;
}

/// Re-evaluates a stored checkpoint against a fresh reference without
/// retraining. The checkpoint fixes the network and stretch value; the
/// configuration supplies the problem and grid.
inline ExperimentResult evaluate_checkpoint(const std::string& ckpt_path, ExperimentConfig cfg,
                                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  cfg.resolve();
  const Checkpoint ck = load_checkpoint(ckpt_path);
  ProblemSpec p;
  double value = 0.0;
  if (cfg.is_curriculum()) {
    const ProblemInfo& info = detail::catalog_info(cfg.problem);
    auto a = cfg.args;
    value = cfg.curriculum_values.back();
    a[info.required.front()] = value;
    p = make_problem(cfg.problem, a);
  } else {
    p = make_problem(cfg.problem, cfg.args);
    const ProblemInfo& info = detail::catalog_info(cfg.problem);
    value = cfg.epsilon.resolve(p.eps_vec);
    if (info.required.size() == 1)
      if (auto it = cfg.args.find(info.required.front()); it != cfg.args.end())
        value = it->second;
  }
  if (ck.params.widths.back() != p.n)
    throw ConfigError("checkpoint output width " + std::to_string(ck.params.widths.back()) +
                      " does not match problem dimension " + std::to_string(p.n));

  ExperimentResult res;
  res.config = cfg;
  res.out_dir = out_dir;
  res.evaluated_at = value;
  res.reference = ReferenceInfo{};
  StageResult sr;
  sr.params = ck.params;
  sr.effective_eps = ck.scale.epsilon;
  sr.stage_value = value;
  res.report.stages.push_back(sr);
  res.report.final_params = ck.params;

  const std::vector<double> times = uniform_grid(cfg.grid);
  ReferenceSolution ref = reference_solution(p, times);
  res.reference = ref.info;
  auto nn = sample_network(ck.params, ck.scale, ck.mode, times);
  std::vector<int> exps(p.n, 0);
  for (int c = 0; c < p.n; ++c) {
    double mx = 0.0;
    for (double v : ref.values[c]) mx = std::max(mx, std::abs(v));
    exps[c] = auto_scale_exponent(mx);
  }
  res.errors = error_report(std::move(nn), std::move(ref.values), times, exps);
  res.names = component_names(cfg.problem, p.n);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_error_csv((dir / "errors.csv").string(), res.errors, res.names);
  detail::write_text(dir / "metrics.json", detail::metrics_json(res, false).dump(2) + "\n");
  return res;
}

// ----- seed sweeps -----

struct SweepResult {
  std::vector<ExperimentResult> runs;
  std::vector<std::string> names;
  std::vector<double> median_linf;  // per component
  std::vector<double> median_l2;
  std::string out_dir;
};

/// Runs one configuration under several seeds, each into its own
/// subdirectory, and summarizes the per-component norms by their median.
inline SweepResult run_sweep(const ExperimentConfig& cfg, std::span<const std::uint64_t> seeds,
                             const std::string& run_name) {
  if (seeds.empty()) throw ConfigError("sweep: need at least one seed");
  SweepResult sw;
  sw.out_dir = cfg.out.empty() ? out_root() + "/" + run_name : cfg.out;
  for (std::uint64_t s : seeds) {
    ExperimentConfig one = cfg;
    one.run_seed = s;
    one.out = sw.out_dir + "/seed-" + std::to_string(s);
    sw.runs.push_back(run_experiment(std::move(one), run_name));
  }
  sw.names = sw.runs.front().names;
  const std::size_t n = sw.names.size();
  nlohmann::json j;
  j["seeds"] = nlohmann::json::array();
  for (std::size_t r = 0; r < sw.runs.size(); ++r) {
    nlohmann::json js{{"seed", seeds[r]}, {"diverged", sw.runs[r].report.diverged}};
    for (std::size_t c = 0; c < n; ++c) {
      js["linf_" + sw.names[c]] = sw.runs[r].errors.components[c].linf;
      js["l2_" + sw.names[c]] = sw.runs[r].errors.components[c].l2;
    }
    j["seeds"].push_back(std::move(js));
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> linf, l2;
    for (const ExperimentResult& r : sw.runs) {
      linf.push_back(r.errors.components[c].linf);
      l2.push_back(r.errors.components[c].l2);
    }
    sw.median_linf.push_back(median(linf));
    sw.median_l2.push_back(median(l2));
    j["median"]["linf_" + sw.names[c]] = sw.median_linf.back();
    j["median"]["l2_" + sw.names[c]] = sw.median_l2.back();
  }
  std::filesystem::create_directories(sw.out_dir);
  detail::write_text(std::filesystem::path(sw.out_dir) / "sweep-summary.json",
                     j.dump(2) + "\n");
  return sw;
}

}  // namespace tsnn
