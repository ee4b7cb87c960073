#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "bome/core.hpp"
#include "bome/inner_solver.hpp"

namespace bome {

/// Squared norms of grad q-hat at or below this are treated as zero.
inline constexpr double kSingularGradSq = 1e-24;

/// q-hat(v, theta) = g(v, theta) - g(v, theta_T). Unclamped.
inline double q_hat_value(const BilevelOracle& oracle, const Vector& v, const Vector& theta,
                          const Vector& theta_T) {
  return oracle.eval_g({v, theta}) - oracle.eval_g({v, theta_T});
}

/// Gradient of q-hat with theta_T held constant:
///   dv     = grad_v g(v, theta) - grad_v g(v, theta_T)
///   dtheta = grad_theta g(v, theta)
inline JointGradient grad_q_hat(const BilevelOracle& oracle, const Vector& v, const Vector& theta,
                                const Vector& theta_T) {
  JointGradient at_point = oracle.grad_g({v, theta});
  const JointGradient at_inner = oracle.grad_g({v, theta_T});
  axpy(-1.0, at_inner.dv, at_point.dv);
  return at_point;
}

inline double compute_phi(BarrierKind kind, double eta, double q_hat, double grad_qhat_norm) {
  switch (kind) {
    case BarrierKind::GradNormSq:
      return eta * grad_qhat_norm * grad_qhat_norm;
    case BarrierKind::Value:
      return eta * std::max(q_hat, 0.0);
  }
  return 0.0;
}

/// Closed-form multiplier of
///   min_delta ||grad_f - delta||^2  s.t.  <grad_q, delta> >= phi
/// i.e. max((phi - <grad_f, grad_q>) / ||grad_q||^2, 0), and 0 when grad_q = 0.
inline double compute_lambda(const JointGradient& grad_f, const JointGradient& grad_qhat, double phi) {
  const double nsq = grad_qhat.squared_norm();
  if (nsq <= kSingularGradSq) return 0.0;
  return std::max((phi - dot(grad_f, grad_qhat)) / nsq, 0.0);
}

struct BarrierSolution {
  double lambda = 0.0;
  double phi = 0.0;
  JointGradient delta;
  JointGradient grad_f;
  JointGradient grad_qhat;
  double q_hat = 0.0;
  InnerResult inner_result;
};

/// Assembles the barrier solution from already computed gradients.
inline BarrierSolution solve_barrier(JointGradient grad_f, JointGradient grad_qhat, double q_hat,
                                     BarrierKind kind, double eta) {
  BarrierSolution s;
  s.q_hat = q_hat;
  s.phi = compute_phi(kind, eta, q_hat, grad_qhat.norm());
  s.lambda = compute_lambda(grad_f, grad_qhat, s.phi);
  s.delta = grad_f;
  if (s.lambda > 0.0) s.delta.add_scaled(s.lambda, grad_qhat);
  s.grad_f = std::move(grad_f);
  s.grad_qhat = std::move(grad_qhat);
  return s;
}

/// Returns a description of every violated invariant of a barrier solution
/// (empty when all hold).
inline std::vector<std::string> barrier_invariant_violations(const BarrierSolution& s,
                                                             double tol = 1e-9) {
  std::vector<std::string> out;
  if (!(s.lambda >= 0.0)) out.emplace_back("lambda < 0");
  if (!(s.phi >= 0.0)) out.emplace_back("phi < 0");
  const double inner = dot(s.grad_qhat, s.delta);
  if (s.grad_qhat.squared_norm() > kSingularGradSq && inner < s.phi - tol * (1.0 + s.phi))
    out.emplace_back("<grad_qhat, delta> < phi");
  const double scale = 1.0 + s.phi + std::abs(dot(s.grad_f, s.grad_qhat));
  if (std::abs(s.lambda * (inner - s.phi)) > tol * scale * std::max(1.0, s.lambda))
    out.emplace_back("complementary slackness");
  if (s.lambda == 0.0 && !(s.delta == s.grad_f)) out.emplace_back("delta != grad_f while inactive");
  return out;
}

/// Heavy-ball accumulator applied to delta: m <- beta * m + delta.
struct MomentumState {
  JointGradient buffer;
  bool initialized = false;

  void reset() {
    buffer = {};
    initialized = false;
  }
};

struct StepResult {
  JointPoint next;
  BarrierSolution solution;
};

/// One outer iteration: inner descent from the current theta, barrier
/// multiplier, and the update (v, theta) <- (v, theta) - (xi_v, xi_theta) * m.
inline StepResult bome_step(const BilevelOracle& oracle, const JointPoint& point,
                            const SolverConfig& cfg, MomentumState& momentum) {
  InnerResult inner =
      inner_descent(oracle, point.v, point.theta, cfg.inner_iters_T, cfg.inner_step_alpha);
  const double q_hat = q_hat_value(oracle, point.v, point.theta, inner.theta_T);
  JointGradient gq = grad_q_hat(oracle, point.v, point.theta, inner.theta_T);
  JointGradient gf = oracle.grad_f(point);

  StepResult r;
  r.solution = solve_barrier(std::move(gf), std::move(gq), q_hat, cfg.barrier_kind, cfg.eta);
  r.solution.inner_result = std::move(inner);
  const JointGradient& delta = r.solution.delta;
  if (!delta.is_finite()) throw NumericalError("bome_step: non-finite update direction");

  const JointGradient* direction = &delta;
  if (cfg.momentum_beta > 0.0) {
    if (!momentum.initialized) {
      momentum.buffer = delta;
      momentum.initialized = true;
    } else {
      for (auto& x : momentum.buffer.dv) x *= cfg.momentum_beta;
      for (auto& x : momentum.buffer.dtheta) x *= cfg.momentum_beta;
      momentum.buffer.add_scaled(1.0, delta);
    }
    direction = &momentum.buffer;
  }

  r.next = point;
  axpy(-cfg.xi_v(), direction->dv, r.next.v);
  axpy(-cfg.xi_theta(), direction->dtheta, r.next.theta);
  return r;
}

}  // namespace bome
