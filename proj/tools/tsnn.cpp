// Command-line front end: list the problem catalog, write reference
// trajectories, train from a preset or config file, re-evaluate checkpoints
// and sweep seeds. Exit codes: 0 success, 2 configuration error, 3 training
// divergence, 4 reference-solver failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tsnn/experiment.hpp"

namespace {

using namespace tsnn;

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Norm table for one finished evaluation, scaled columns only where the
// presentation exponent is nonzero.
void print_errors(const ExperimentResult& res) {
  for (std::size_t c = 0; c < res.errors.components.size(); ++c) {
    const ComponentError& ce = res.errors.components[c];
    std::printf("  %-4s linf %s  l2 %s", res.names[c].c_str(), sci(ce.linf).c_str(),
                sci(ce.l2).c_str());
    if (ce.scale_exponent != 0)
      std::printf("  (x1e%d: linf %s  l2 %s)", ce.scale_exponent,
                  sci(ce.linf_scaled).c_str(), sci(ce.l2_scaled).c_str());
    std::printf("\n");
  }
}

// Shared by train, evaluate and sweep: exactly one of --preset/--config
// selects the base configuration, then command-line overrides apply on top.
struct ConfigArgs {
  std::string preset_name;
  std::string config_path;
  std::string out;
  std::string name;
  double budget_scale = -1.0;  // negative keeps the config's value
  bool full = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int grid = 0;  // zero keeps the config's value

  void attach(CLI::App* cmd, bool with_budget) {
    cmd->add_option("--preset", preset_name, "named preset (see 'list')");
    cmd->add_option("--config", config_path, "configuration file");
    cmd->add_option("--out", out, "output directory (default <out root>/<name>)");
    cmd->add_option("--name", name, "run name used for the default output directory");
    cmd->add_option("--grid", grid, "evaluation grid points");
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [this](const std::uint64_t& s) {
          seed = s;
          seed_set = true;
        },
        "root seed for initialization and sampling");
    if (with_budget) {
      cmd->add_option("--budget-scale", budget_scale,
                      "iteration budget multiplier (presets default to 0.1)");
      cmd->add_flag("--full", full, "run full iteration budgets (budget scale 1)");
    }
  }

  ExperimentConfig resolve_config() const {
    if (preset_name.empty() == config_path.empty())
      throw ConfigError("give exactly one of --preset and --config");
    ExperimentConfig cfg =
        preset_name.empty() ? load_config_file(config_path) : preset(preset_name);
    if (seed_set) cfg.run_seed = seed;
    if (grid > 0) cfg.grid = grid;
    if (full) cfg.budget_scale = 1.0;
    if (budget_scale > 0.0) cfg.budget_scale = budget_scale;
    if (!out.empty()) cfg.out = out;
    cfg.resolve();
    return cfg;
  }

  std::string run_name() const {
    if (!name.empty()) return name;
    if (!preset_name.empty()) return preset_name;
    return std::filesystem::path(config_path).stem().string();
  }
};

int cmd_list() {
  std::printf("problems:\n");
  for (const ProblemInfo& info : problem_catalog()) {
    std::printf("  %-11s n=%d order=%d  %s\n", info.name.c_str(), info.n, info.order,
                info.summary.c_str());
    std::printf("              required:");
    for (const auto& k : info.required) std::printf(" %s", k.c_str());
    if (!info.optional.empty()) {
      std::printf("  optional:");
      for (const auto& k : info.optional) std::printf(" %s", k.c_str());
    }
    std::printf("\n");
  }
  std::printf("presets:\n");
  for (const std::string& name : preset_names()) {
    const ExperimentConfig cfg = preset(name);
    long full_iters = cfg.train.iterations;
    for (const StageOverride& ov : cfg.stage_overrides)
      if (ov.iterations) full_iters += *ov.iterations;
    const std::string shape = cfg.is_curriculum()
                                  ? std::to_string(cfg.curriculum_values.size()) + " stages"
                                  : "direct";
    std::printf("  %-26s %s, %s, %ld iterations at full budget\n", name.c_str(),
                cfg.problem.c_str(), shape.c_str(), full_iters);
  }
  return 0;
}

int cmd_reference(const std::string& problem, const std::vector<std::string>& params,
                  int grid, std::string out) {
  std::map<std::string, double> args;
  for (const std::string& kv : params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--param expects key=value, got '" + kv + "'");
    args[kv.substr(0, eq)] = parse_double(kv.substr(eq + 1));
  }
  const ProblemSpec p = make_problem(problem, args);
  const std::vector<double> times = uniform_grid(grid);
  const ReferenceSolution ref = reference_solution(p, times);
  if (out.empty()) out = out_root() + "/reference-" + problem + ".csv";
  std::filesystem::create_directories(std::filesystem::path(out).parent_path());
  const std::vector<std::string> names = component_names(problem, p.n);
  std::ostringstream csv;
  csv << "tau";
  for (const std::string& n : names) csv << ',' << n;
  csv << "\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    csv << fmt_double(times[i]);
    for (int c = 0; c < p.n; ++c) csv << ',' << fmt_double(ref.values[c][i]);
    csv << "\n";
  }
  std::ofstream f(out);
  if (!f) throw ConfigError("cannot write '" + out + "'");
  f << csv.str();
  std::printf("reference %s (%s) -> %s\n", problem.c_str(), ref.info.method.c_str(),
              out.c_str());
  return 0;
}

int cmd_train(const ConfigArgs& args) {
  const ExperimentConfig cfg = args.resolve_config();
  const ExperimentResult res = run_experiment(cfg, args.run_name());
  const StageResult& last = res.report.stages.back();
  std::printf("%s: %zu stage(s), %zu iterations, %.1f s\n", cfg.problem.c_str(),
              res.report.stages.size(), res.report.history.size(),
              res.report.wall_seconds);
  std::printf("  final stage value %s, effective eps %s, loss %s\n",
              sci(last.stage_value).c_str(), sci(last.effective_eps).c_str(),
              sci(last.final_loss).c_str());
  print_errors(res);
  std::printf("  artifacts in %s\n", res.out_dir.c_str());
  if (res.report.diverged) {
    std::fprintf(stderr, "training diverged at stage %d (value %s), iteration %ld\n",
                 last.stage, sci(last.stage_value).c_str(), last.diverged_at);
    return 3;
  }
  return 0;
}

int cmd_evaluate(const ConfigArgs& args, const std::string& checkpoint) {
  const ExperimentConfig cfg = args.resolve_config();
  const std::string out =
      args.out.empty() ? out_root() + "/" + args.run_name() + "-eval" : args.out;
  const ExperimentResult res = evaluate_checkpoint(checkpoint, cfg, out);
  std::printf("%s at value %s, effective eps %s\n", cfg.problem.c_str(),
              sci(res.evaluated_at).c_str(),
              sci(res.report.stages.back().effective_eps).c_str());
  print_errors(res);
  std::printf("  artifacts in %s\n", res.out_dir.c_str());
  return 0;
}

int cmd_sweep(const ConfigArgs& args, const std::vector<std::uint64_t>& seeds) {
  const ExperimentConfig cfg = args.resolve_config();
  const SweepResult sw = run_sweep(cfg, seeds, args.run_name());
  for (std::size_t r = 0; r < sw.runs.size(); ++r) {
    std::printf("seed %llu%s:\n", static_cast<unsigned long long>(seeds[r]),
                sw.runs[r].report.diverged ? " (diverged)" : "");
    print_errors(sw.runs[r]);
  }
  std::printf("median over %zu seeds:\n", seeds.size());
  for (std::size_t c = 0; c < sw.names.size(); ++c)
    std::printf("  %-4s linf %s  l2 %s\n", sw.names[c].c_str(),
                sci(sw.median_linf[c]).c_str(), sci(sw.median_l2[c]).c_str());
  std::printf("  artifacts in %s\n", sw.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-scale neural network solver for singularly perturbed ODE systems"};
  app.require_subcommand(1);

  CLI::App* list = app.add_subcommand("list", "show problems and presets");

  CLI::App* reference =
      app.add_subcommand("reference", "write a reference trajectory CSV");
  std::string ref_problem;
  std::vector<std::string> ref_params;
  int ref_grid = 1001;
  std::string ref_out;
  reference->add_option("--problem", ref_problem, "catalog problem name")->required();
  reference->add_option("--param", ref_params, "problem parameter as key=value");
  reference->add_option("--grid", ref_grid, "number of grid points");
  reference->add_option("--out", ref_out, "output CSV path");

  CLI::App* train = app.add_subcommand("train", "train a network and report errors");
  ConfigArgs train_args;
  train_args.attach(train, true);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "re-evaluate a checkpoint against the reference");
  ConfigArgs eval_args;
  std::string ckpt;
  eval_args.attach(evaluate, false);
  evaluate->add_option("--checkpoint", ckpt, "checkpoint file")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "train one config under several seeds");
  ConfigArgs sweep_args;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  sweep_args.attach(sweep, true);
  sweep->add_option("--seeds", seeds, "root seeds, one run each");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    if (list->parsed()) return cmd_list();
    if (reference->parsed()) return cmd_reference(ref_problem, ref_params, ref_grid, ref_out);
    if (train->parsed()) return cmd_train(train_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args, ckpt);
    if (sweep->parsed()) return cmd_sweep(sweep_args, seeds);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 3;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 4;
  }
  return 0;
}
