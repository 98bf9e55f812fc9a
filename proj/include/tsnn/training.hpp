#pragma once
// Collocation training: the discrete loss is the mean squared residual over
// sampled interior points plus alpha-weighted squared condition mismatches,
// recorded once per stage on an adjoint tape and replayed per optimizer step.
// A curriculum run walks a decreasing sequence of stiffness values, rebuilding
// the problem at each stage and warm-starting from the previous parameters.
// Every random draw derives from the run seed, so a report is reproducible
// bit for bit from its recorded configuration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsnn/common.hpp"
#include "tsnn/network.hpp"
#include "tsnn/problem.hpp"
#include "tsnn/rng.hpp"
#include "tsnn/tape.hpp"

namespace tsnn {

/// Piecewise-constant learning rate over the 1-based step index: rates[i]
/// applies while step <= bounds[i], tail beyond the last bound. An empty
/// table is a fixed rate.
struct LrSchedule {
  std::vector<long> bounds;
  std::vector<double> rates;
  double tail = 1e-3;

  static LrSchedule fixed(double rate) {
    LrSchedule s;
    s.tail = rate;
    return s;
  }

  static LrSchedule piecewise_default() {
    return {{10000, 30000, 50000, 70000}, {1e-3, 5e-3, 1e-3, 5e-4}, 1e-4};
  }

  double at(long step) const {
    for (std::size_t i = 0; i < bounds.size(); ++i)
      if (step <= bounds[i]) return rates[i];
    return tail;
  }

  bool is_fixed() const { return bounds.empty(); }

  void validate() const {
    if (bounds.size() != rates.size())
      throw ConfigError("lr schedule: bounds and rates differ in length");
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (bounds[i] <= 0 || (i > 0 && bounds[i] <= bounds[i - 1]))
        throw ConfigError("lr schedule: bounds must be positive and ascending");
      if (!(rates[i] > 0.0)) throw ConfigError("lr schedule: rates must be positive");
    }
    if (!(tail > 0.0)) throw ConfigError("lr schedule: rates must be positive");
  }

  std::string describe() const {
    if (bounds.empty()) return "fixed " + fmt_double(tail);
    std::string s = "piecewise";
    for (std::size_t i = 0; i < bounds.size(); ++i)
      s += ' ' + std::to_string(bounds[i]) + ':' + fmt_double(rates[i]);
    return s + " tail:" + fmt_double(tail);
  }
};

/// Default scheduler applied to a bare step index.
inline double lr_at(long step) { return LrSchedule::piecewise_default().at(step); }

enum class Resample { PerStage, PerIteration };

struct TrainConfig {
  double alpha = 1.0;     // condition weight
  int n_collocation = 300;
  int n_boundary = 0;     // divisor of the condition term; 0 takes the condition count
  LrSchedule lr = LrSchedule::piecewise_default();
  long iterations = 0;
  std::uint64_t seed = 0;
  Resample resample = Resample::PerStage;

  void validate() const {
    if (!(alpha >= 1.0)) throw ConfigError("train: alpha must be at least 1");
    if (n_collocation < 1) throw ConfigError("train: need at least one collocation point");
    if (n_boundary < 0) throw ConfigError("train: n_boundary must be non-negative");
    if (iterations < 0) throw ConfigError("train: iteration budget must be non-negative");
    lr.validate();
  }
};

/// Interior points drawn i.i.d. uniform on (0,1), sorted ascending. Fully
/// determined by the seed.
inline std::vector<double> sample_collocation(int n_c, std::uint64_t seed) {
  if (n_c < 1) throw ConfigError("sample_collocation: need at least one point");
  Rng rng(seed);
  std::vector<double> pts(static_cast<std::size_t>(n_c));
  for (double& t : pts) t = rng.uniform01();
  std::sort(pts.begin(), pts.end());
  return pts;
}

/// Records the model's components at a traced time point. The production model
/// is a network forward pass; tests may substitute any recordable expression.
using TracedModel = std::function<std::vector<Trace>(AdjointRecorder&, Trace)>;

inline TracedModel traced_network(const NetworkParams& params, const TwoScaleConfig& scale,
                                  FeatureMode mode) {
  params.validate(mode);
  scale.validate();
  return [widths = params.widths, scale, mode](AdjointRecorder& rec, Trace tau) {
    return forward_traced(rec, widths, tau, scale, mode);
  };
}

/// Records mean |r|^2 over the points plus (alpha / N_b) sum of squared
/// condition mismatches and marks the total as the tape result. The recorder
/// must already be bound to a parameter vector.
inline void record_loss(AdjointRecorder& rec, const ProblemSpec& p, const TrainConfig& cfg,
                        std::span<const double> points, const TracedModel& model) {
  if (points.empty()) throw ConfigError("record_loss: no collocation points");
  if (p.conditions.empty()) throw ConfigError("record_loss: problem states no conditions");
  const auto& res = p.residual<Trace>();
  const Trace zero{&rec, rec.constant(0.0)};
  Trace racc = zero;
  std::vector<Trace> u, du, ddu, r;
  for (double t : points) {
    Trace tau{&rec, rec.input(t)};
    u = model(rec, tau);
    if (static_cast<int>(u.size()) != p.n)
      throw ConfigError("record_loss: model component count does not match the problem");
    du.clear();
    ddu.clear();
    for (const Trace& ui : u) du.push_back({&rec, rec.extract_d1(ui.id)});
    if (p.order >= 2)
      for (const Trace& ui : u) ddu.push_back({&rec, rec.extract_d2(ui.id)});
    r.assign(u.size(), zero);
    res(tau, std::span<const Trace>(u), std::span<const Trace>(du),
        std::span<const Trace>(ddu), std::span<Trace>(r));
    for (const Trace& ri : r) racc = racc + powi(ri, 2);
  }
  Trace loss = racc / static_cast<double>(points.size());
  const int nb = cfg.n_boundary > 0 ? cfg.n_boundary
                                    : static_cast<int>(p.conditions.size());
  Trace bacc = zero;
  for (const BoundaryCondition& bc : p.conditions) {
    Trace tb{&rec, rec.input(bc.tau)};
    auto ub = model(rec, tb);
    bacc = bacc + powi(ub[static_cast<std::size_t>(bc.component)] - bc.value, 2);
  }
  loss = loss + bacc * (cfg.alpha / static_cast<double>(nb));
  rec.set_result(loss.id);
}

/// Loss value at the bound parameters plus the tape that produced it. The tape
/// keeps a pointer into the parameter vector it was built against, so that
/// vector must outlive the tape.
struct LossTape {
  AdjointRecorder rec;
  double value = 0.0;
};

inline LossTape make_loss_tape(const ProblemSpec& p, const TwoScaleConfig& scale,
                               FeatureMode mode, const TrainConfig& cfg,
                               std::span<const double> points, const NetworkParams& params) {
  LossTape t{AdjointRecorder(params.theta.size()), 0.0};
  t.rec.rebind(params.theta);
  record_loss(t.rec, p, cfg, points, traced_network(params, scale, mode));
  t.value = t.rec.result_value();
  return t;
}

// ----- optimizer -----

struct AdamState {
  std::vector<double> m, v;
  long t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Canonical bias-corrected Adam update (0.9, 0.999, 1e-8). A non-finite
/// gradient rejects the whole step before any state changes.
inline void adam_step(std::vector<double>& theta, std::span<const double> grad,
                      AdamState& st, double lr) {
  if (theta.size() != grad.size() || theta.size() != st.m.size())
    throw ConfigError("adam_step: parameter, gradient and state sizes differ");
  for (double g : grad)
    if (!std::isfinite(g)) throw DivergenceError("non-finite gradient, step rejected");
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  st.t += 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * g * g;
    theta[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
  }
}

// ----- reports -----

struct LossRecord {
  long iteration = 0;  // global index across the run
  int stage = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct StageResult {
  int stage = 0;
  double stage_value = 0.0;    // stiffness parameter this stage trained at
  double effective_eps = 0.0;  // stretch parameter the features saw
  TrainConfig cfg;             // settings after overrides
  NetworkParams params;        // parameters at the end of the stage
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool diverged = false;
  long diverged_at = -1;  // stage-local iteration of the rejected step
};

struct RunReport {
  std::vector<LossRecord> history;
  NetworkParams final_params;
  std::vector<StageResult> stages;
  double wall_seconds = 0.0;
  bool diverged = false;
};

namespace detail {

inline StageResult run_stage(const ProblemSpec& p, const TwoScaleConfig& scale,
                             FeatureMode mode, const TrainConfig& cfg,
                             const NetworkParams& init, std::vector<LossRecord>& history,
                             int stage_index, long iteration_offset, double stage_value) {
  cfg.validate();
  init.validate(mode);
  StageResult out;
  out.stage = stage_index;
  out.stage_value = stage_value;
  out.effective_eps = scale.epsilon;
  out.cfg = cfg;
  out.params = init;
  if (cfg.iterations == 0) return out;

  std::vector<double>& theta = out.params.theta;
  std::vector<double> points = sample_collocation(cfg.n_collocation, cfg.seed);
  LossTape tape = make_loss_tape(p, scale, mode, cfg, points, out.params);
  AdamState st(theta.size());
  for (long it = 0; it < cfg.iterations; ++it) {
    if (cfg.resample == Resample::PerIteration && it > 0) {
      points = sample_collocation(cfg.n_collocation,
                                  derive_seed(cfg.seed, "iter", static_cast<std::uint64_t>(it)));
      tape = make_loss_tape(p, scale, mode, cfg, points, out.params);
    } else {
      tape.rec.rebind(theta);
    }
    const double lr = cfg.lr.at(it + 1);
    double loss = 0.0;
    try {
      const std::vector<double> grad = tape.rec.gradient();
      loss = tape.rec.result_value();
      adam_step(theta, grad, st, lr);
    } catch (const DivergenceError&) {
      out.diverged = true;
      out.diverged_at = it;
      break;
    }
    history.push_back({iteration_offset + it, stage_index, lr, loss});
    if (it == 0) out.initial_loss = loss;
    out.final_loss = loss;
  }
  return out;
}

}  // namespace detail

/// One stage at fixed stiffness: samples collocation points from cfg.seed,
/// records the loss once, then iterates replay, backward sweep and Adam.
/// Divergence stops the stage and returns what was trained so far.
inline RunReport train_stage(const ProblemSpec& p, const TwoScaleConfig& scale,
                             FeatureMode mode, const TrainConfig& cfg,
                             const NetworkParams& init) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.stages.push_back(
      detail::run_stage(p, scale, mode, cfg, init, rep.history, 0, 0, scale.epsilon));
  rep.final_params = rep.stages.back().params;
  rep.diverged = rep.stages.back().diverged;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ----- curriculum -----

struct StageOverride {
  std::optional<double> alpha;
  std::optional<int> n_collocation;
  std::optional<LrSchedule> lr;
  std::optional<long> iterations;
};

/// A family of problems indexed by the continued stiffness parameter, plus the
/// policy that collapses each member's small parameters into the one stretch
/// value the features use.
struct CurriculumProblem {
  std::string name;
  std::function<ProblemSpec(double)> rebuild;
  EffectiveEpsilon policy;
};

/// Catalog problem whose single required parameter is the continued one.
inline CurriculumProblem curriculum_problem(const std::string& name,
                                            std::map<std::string, double> base_args = {},
                                            EffectiveEpsilon policy = {}) {
  for (const ProblemInfo& info : problem_catalog()) {
    if (info.name != name) continue;
    if (info.required.size() != 1)
      throw ConfigError("problem '" + name + "' has no single continued parameter");
    const std::string key = info.required.front();
    return {name,
            [name, key, base_args = std::move(base_args)](double v) {
              auto args = base_args;
              args[key] = v;
              return make_problem(name, args);
            },
            policy};
  }
  throw ConfigError("unknown problem '" + name + "'");
}

/// Stage values from start to target by repeated division. The closing stage
/// is pinned to the exact target whether the walk lands on it (to within
/// 1e-9 relative) or steps past it.
inline std::vector<double> expand_stage_eps(double eps0, double target, double factor) {
  if (!(eps0 > 0.0 && target > 0.0))
    throw ConfigError("curriculum: stage eps values must be positive");
  if (!(factor > 1.0)) throw ConfigError("curriculum: reduction factor must exceed 1");
  constexpr double rel = 1e-9;
  if (eps0 < target * (1.0 - rel))
    throw ConfigError("curriculum: start eps lies below the target");
  std::vector<double> out{eps0};
  double cur = eps0;
  while (cur > target * (1.0 + rel)) {
    const double next = cur / factor;
    if (next > target * (1.0 + rel)) {
      out.push_back(next);
      cur = next;
    } else {
      out.push_back(target);
      cur = target;
    }
  }
  return out;
}

struct CurriculumSchedule {
  // Generator form, used when explicit_values is empty.
  double eps0 = 0.0;
  double target = 0.0;
  double factor = 0.0;
  std::vector<double> explicit_values;
  std::vector<StageOverride> overrides;  // index-aligned; absent entries keep the base config
  // Stages whose value sits below 1e-2 drop to a fixed 1e-4 rate unless an
  // override pins one.
  bool small_eps_lr_rule = true;

  std::vector<double> stage_values() const {
    if (!explicit_values.empty()) {
      for (double v : explicit_values)
        if (!(v > 0.0)) throw ConfigError("curriculum: stage eps values must be positive");
      return explicit_values;
    }
    return expand_stage_eps(eps0, target, factor);
  }
};

/// Staged continuation: stage 0 starts from Xavier parameters, every later
/// stage from the previous stage's result. Xavier and per-stage collocation
/// seeds derive from the base seed, so one seed fixes the whole run.
inline RunReport curriculum_train(const CurriculumProblem& cp, const CurriculumSchedule& sched,
                                  const TrainConfig& base, std::span<const int> widths,
                                  FeatureMode mode = FeatureMode::TwoScale,
                                  double gamma = -0.5, double tau_c = 0.5) {
  const auto t0 = std::chrono::steady_clock::now();
  base.validate();
  const std::vector<double> values = sched.stage_values();
  std::vector<ProblemSpec> probs;
  std::vector<double> eff;
  probs.reserve(values.size());
  for (double v : values) {
    probs.push_back(cp.rebuild(v));
    eff.push_back(cp.policy.resolve(probs.back().eps_vec));
  }
  for (std::size_t k = 1; k < eff.size(); ++k)
    if (!(eff[k] < eff[k - 1]))
      throw ConfigError("curriculum: effective eps sequence must be strictly decreasing");

  RunReport rep;
  NetworkParams params = init_xavier(std::vector<int>(widths.begin(), widths.end()),
                                     derive_seed(base.seed, "init"), mode);
  for (std::size_t k = 0; k < values.size(); ++k) {
    TrainConfig cfg = base;
    cfg.seed = derive_seed(base.seed, "colloc", k);
    if (sched.small_eps_lr_rule && values[k] < 1e-2 * (1.0 - 1e-9))
      cfg.lr = LrSchedule::fixed(1e-4);
    if (k < sched.overrides.size()) {
      const StageOverride& ov = sched.overrides[k];
      if (ov.alpha) cfg.alpha = *ov.alpha;
      if (ov.n_collocation) cfg.n_collocation = *ov.n_collocation;
      if (ov.lr) cfg.lr = *ov.lr;
      if (ov.iterations) cfg.iterations = *ov.iterations;
    }
    const TwoScaleConfig scale{eff[k], gamma, tau_c};
    StageResult sr = detail::run_stage(probs[k], scale, mode, cfg, params, rep.history,
                                       static_cast<int>(k),
                                       static_cast<long>(rep.history.size()), values[k]);
    params = sr.params;
    const bool died = sr.diverged;
    rep.stages.push_back(std::move(sr));
    if (died) {
      rep.diverged = true;
      break;
    }
  }
  rep.final_params = std::move(params);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace tsnn
