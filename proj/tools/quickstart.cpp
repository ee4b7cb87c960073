// Minimal library usage: a hand-written oracle solved with the default solver.
//
//   min_{v,theta} (v - 2)^2 + (theta - 1)^2   s.t.  theta in argmin (theta - v)^2
//
// The solution is v = theta = 1.5.

#include <cstdio>

#include "bome/core.hpp"
#include "bome/solver_runner.hpp"

int main() {
  bome::BilevelOracle o;
  o.name = "quickstart";
  o.dim_v = 1;
  o.dim_theta = 1;
  o.eval_f = [](const bome::JointPoint& p) {
    return (p.v[0] - 2.0) * (p.v[0] - 2.0) + (p.theta[0] - 1.0) * (p.theta[0] - 1.0);
  };
  o.grad_f = [](const bome::JointPoint& p) {
    return bome::JointGradient{{2.0 * (p.v[0] - 2.0)}, {2.0 * (p.theta[0] - 1.0)}};
  };
  o.eval_g = [](const bome::JointPoint& p) { return (p.theta[0] - p.v[0]) * (p.theta[0] - p.v[0]); };
  o.grad_g = [](const bome::JointPoint& p) {
    const double r = p.theta[0] - p.v[0];
    return bome::JointGradient{{-2.0 * r}, {2.0 * r}};
  };
  o.exact_inner_opt = [](const bome::Vector& v) { return bome::Vector{v[0]}; };

  // The inner problem has curvature 2, so alpha = 0.25 halves theta - v per
  // inner step; with alpha tied to a small xi the T inner steps barely move.
  bome::SolverConfig cfg = bome::SolverConfig::with_step(0.05);
  cfg.inner_step_alpha = 0.25;
  cfg.max_outer_iters_K = 2000;
  const bome::Trace t = bome::run(o, bome::JointPoint{{0.0}, {0.0}}, cfg);

  std::printf("v = %.6f  theta = %.6f  f = %.6f  kkt = %.3e\n", t.final_point.v[0], t.final_point.theta[0],
              t.final_f, t.final_kkt->total);
  return 0;
}
