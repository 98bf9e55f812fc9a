// Minimal library walkthrough: train a two-scale network on the second-order
// boundary-value problem at eps = 1e-2 and compare against its closed form.
// Runs in a few seconds; accuracy here is demo-grade, not paper-grade.

#include <cstdio>

#include "tsnn/experiment.hpp"

int main() {
  using namespace tsnn;

  const ProblemSpec p = make_problem("linear-bvp", {{"eps", 1e-2}});
  const double eff = EffectiveEpsilon{}.resolve(p.eps_vec);
  const TwoScaleConfig scale{eff, -0.5, 0.5};

  TrainConfig cfg;
  cfg.alpha = 100.0;  // boundary terms dominate the loss or the layer is lost
  cfg.n_collocation = 128;
  cfg.lr = LrSchedule::fixed(1e-3);
  cfg.iterations = 2500;
  cfg.seed = derive_seed(1, "colloc", 0);

  const std::vector<int> widths{3, 10, 10, 10, 10, p.n};
  const NetworkParams init = init_xavier(widths, derive_seed(1, "init"));
  const RunReport rep = train_stage(p, scale, FeatureMode::TwoScale, cfg, init);
  std::printf("loss %.3e -> %.3e over %ld iterations (%.1f s)\n",
              rep.stages[0].initial_loss, rep.stages[0].final_loss, cfg.iterations,
              rep.wall_seconds);

  // Error against the exact solution on a uniform grid.
  const std::vector<double> times = uniform_grid(501);
  const ReferenceSolution ref = reference_solution(p, times);
  const auto nn = sample_network(rep.final_params, scale, FeatureMode::TwoScale, times);
  const ErrorReport err = error_report(nn, ref.values, times);
  for (std::size_t c = 0; c < err.components.size(); ++c)
    std::printf("component %zu: linf %.3e  l2 %.3e\n", c, err.components[c].linf,
                err.components[c].l2);
  return 0;
}
