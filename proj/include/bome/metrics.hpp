#pragma once

#include <algorithm>
#include <string>

#include "bome/bome_step.hpp"
#include "bome/core.hpp"
#include "bome/inner_solver.hpp"

namespace bome {

enum class KktVariant { Exact, Proxy, Attraction };

inline const char* to_string(KktVariant v) {
  switch (v) {
    case KktVariant::Exact:
      return "exact";
    case KktVariant::Proxy:
      return "proxy";
    case KktVariant::Attraction:
      return "attraction";
  }
  return "?";
}

/// Stationarity measure split into
///   local_improvement = min_{lambda>=0} ||grad_f + lambda grad_q||^2
///   feasibility       = q
struct KktReport {
  double local_improvement = 0.0;
  double feasibility = 0.0;
  double total = 0.0;
  double lambda_star = 0.0;
  KktVariant variant = KktVariant::Exact;
};

/// argmin_{lambda >= 0} ||grad_f + lambda grad_q||^2.
inline double closed_form_lambda_star(const JointGradient& grad_f, const JointGradient& grad_q) {
  const double nsq = grad_q.squared_norm();
  if (nsq <= kSingularGradSq) return 0.0;
  return std::max(0.0, -dot(grad_f, grad_q) / nsq);
}

inline KktReport make_kkt_report(const JointGradient& grad_f, const JointGradient& grad_q, double q,
                                 KktVariant variant) {
  KktReport r;
  r.variant = variant;
  r.lambda_star = closed_form_lambda_star(grad_f, grad_q);
  JointGradient residual = grad_f;
  if (r.lambda_star > 0.0) residual.add_scaled(r.lambda_star, grad_q);
  // Rounding can push the residual a hair above ||grad_f||^2; lambda = 0 is
  // always admissible so that value is an upper bound.
  r.local_improvement = std::min(residual.squared_norm(), grad_f.squared_norm());
  r.feasibility = q;
  r.total = r.local_improvement + r.feasibility;
  return r;
}

/// Exact measure using theta*(v) (Danskin gradient of the value function), or
/// the exact value function g*(v) when the problem exposes that instead.
inline KktReport kkt_exact(const BilevelOracle& oracle, const JointPoint& point) {
  const JointGradient gf = oracle.grad_f(point);
  if (oracle.exact_inner_opt) {
    const Vector theta_star = oracle.exact_inner_opt(point.v);
    const double q = q_hat_value(oracle, point.v, point.theta, theta_star);
    const JointGradient gq = grad_q_hat(oracle, point.v, point.theta, theta_star);
    return make_kkt_report(gf, gq, q, KktVariant::Exact);
  }
  if (oracle.exact_value) {
    const ValueFunction vf = oracle.exact_value(point.v);
    JointGradient gq = oracle.grad_g(point);
    axpy(-1.0, vf.grad_v, gq.dv);
    const double q = oracle.eval_g(point) - vf.value;
    return make_kkt_report(gf, gq, q, KktVariant::Exact);
  }
  throw MissingOracleCapability("kkt_exact: oracle '" + oracle.name +
                                "' provides neither an exact inner optimum nor a value function");
}

/// Exact value-function gap q = g(v,theta) - g*(v).
inline double exact_q(const BilevelOracle& oracle, const JointPoint& point) {
  if (oracle.exact_inner_opt)
    return q_hat_value(oracle, point.v, point.theta, oracle.exact_inner_opt(point.v));
  if (oracle.exact_value) return oracle.eval_g(point) - oracle.exact_value(point.v).value;
  throw MissingOracleCapability("exact_q: oracle '" + oracle.name + "' has no exact value function");
}

/// Measure with q-hat / grad q-hat from the run's own (T, alpha) inner loop.
inline KktReport kkt_proxy(const BilevelOracle& oracle, const JointPoint& point,
                           const SolverConfig& cfg) {
  const InnerResult inner =
      inner_descent(oracle, point.v, point.theta, cfg.inner_iters_T, cfg.inner_step_alpha);
  const double q = q_hat_value(oracle, point.v, point.theta, inner.theta_T);
  const JointGradient gq = grad_q_hat(oracle, point.v, point.theta, inner.theta_T);
  return make_kkt_report(oracle.grad_f(point), gq, q, KktVariant::Proxy);
}

/// Local measure relative to the attraction point of (v, theta). Throws
/// NotConvergedError when the inner sequence does not converge.
inline KktReport kkt_attraction(const BilevelOracle& oracle, const JointPoint& point, double alpha,
                                double grad_tol = AttractionOptions{}.grad_tol,
                                int max_iters = AttractionOptions{}.max_iters) {
  const AttractionResult ap =
      attraction_point(oracle, point.v, point.theta, alpha, {grad_tol, max_iters});
  if (!ap.converged)
    throw NotConvergedError("kkt_attraction: attraction point did not converge (grad norm " +
                                std::to_string(ap.grad_norm) + ")",
                            ap.theta, ap.grad_norm);
  const double q = q_hat_value(oracle, point.v, point.theta, ap.theta);
  const JointGradient gq = grad_q_hat(oracle, point.v, point.theta, ap.theta);
  return make_kkt_report(oracle.grad_f(point), gq, q, KktVariant::Attraction);
}

}  // namespace bome
