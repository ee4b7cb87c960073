#pragma once

#include <utility>

#include "bome/core.hpp"

namespace bome {

enum class BaselineKind { NaiveGDA, OptimisticGD };

/// Descent direction in v and ascent direction in theta on the payoff f,
/// packed as G = (df/dv, -df/dtheta) so that every update subtracts G.
inline JointGradient minimax_field(const BilevelOracle& oracle, const JointPoint& point) {
  JointGradient g = oracle.grad_f(point);
  for (auto& x : g.dtheta) x = -x;
  return g;
}

/// Simultaneous gradient descent-ascent: v -= xi df/dv, theta += xi df/dtheta.
inline JointPoint gda_step(const BilevelOracle& oracle, const JointPoint& point, double xi) {
  const JointGradient G = minimax_field(oracle, point);
  JointPoint next = point;
  axpy(-xi, G.dv, next.v);
  axpy(-xi, G.dtheta, next.theta);
  return next;
}

/// Optimistic gradient descent: w <- w - 2 xi G_k + xi G_{k-1}.
/// Pass an empty `prev` on the first step (G_{-1} = G_0).
inline std::pair<JointPoint, JointGradient> ogd_step(const BilevelOracle& oracle,
                                                     const JointPoint& point,
                                                     const JointGradient& prev, double xi) {
  JointGradient G = minimax_field(oracle, point);
  const JointGradient& last = prev.dv.empty() && prev.dtheta.empty() ? G : prev;
  JointPoint next = point;
  axpy(-2.0 * xi, G.dv, next.v);
  axpy(-2.0 * xi, G.dtheta, next.theta);
  axpy(xi, last.dv, next.v);
  axpy(xi, last.dtheta, next.theta);
  return {std::move(next), std::move(G)};
}

}  // namespace bome
