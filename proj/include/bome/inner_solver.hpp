#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "bome/core.hpp"

namespace bome {

/// Gradient norms below this end the inner loop early.
inline constexpr double kInnerStationaryTol = 1e-14;

struct InnerResult {
  Vector theta_T;
  double g_before = 0.0;
  double g_after = 0.0;
  int steps_taken = 0;
};

/// T steps of plain gradient descent on g(v, .) starting from theta0:
///   theta^{t+1} = theta^t - alpha * grad_theta g(v, theta^t)
inline InnerResult inner_descent(const BilevelOracle& oracle, const Vector& v, const Vector& theta0,
                                 int T, double alpha) {
  if (T < 0) throw ConfigError("inner_descent: T must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("inner_descent: alpha must be > 0");

  JointPoint p{v, theta0};
  InnerResult r;
  r.g_before = oracle.eval_g(p);
  for (int t = 0; t < T; ++t) {
    const JointGradient grad = oracle.grad_g(p);
    if (!all_finite(grad.dtheta)) throw NumericalError("inner_descent: non-finite inner gradient");
    if (norm(grad.dtheta) < kInnerStationaryTol) break;
    axpy(-alpha, grad.dtheta, p.theta);
    ++r.steps_taken;
  }
  r.g_after = r.steps_taken == 0 ? r.g_before : oracle.eval_g(p);
  r.theta_T = std::move(p.theta);
  return r;
}

struct AttractionOptions {
  double grad_tol = 1e-10;
  int max_iters = 100000;
};

/// Raised by consumers that need a converged attraction point.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, Vector last_theta, double grad_norm)
      : Error(what), last_theta_(std::move(last_theta)), grad_norm_(grad_norm) {}

  const Vector& last_theta() const { return last_theta_; }
  double grad_norm() const { return grad_norm_; }

 private:
  Vector last_theta_;
  double grad_norm_;
};

/// Limit of the inner gradient-descent sequence. Non-convergence is reported
/// through `converged`, not thrown.
struct AttractionResult {
  Vector theta;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
};

inline AttractionResult attraction_point(const BilevelOracle& oracle, const Vector& v,
                                         const Vector& theta0, double alpha,
                                         AttractionOptions opts = {}) {
  if (!(opts.grad_tol > 0.0)) throw ConfigError("attraction_point: grad_tol must be > 0");
  if (!(alpha > 0.0)) throw ConfigError("attraction_point: alpha must be > 0");

  JointPoint p{v, theta0};
  AttractionResult r;
  for (;;) {
    const JointGradient grad = oracle.grad_g(p);
    if (!all_finite(grad.dtheta)) throw NumericalError("attraction_point: non-finite inner gradient");
    r.grad_norm = norm(grad.dtheta);
    if (r.grad_norm < opts.grad_tol) {
      r.converged = true;
      break;
    }
    if (r.iterations >= opts.max_iters) break;
    axpy(-alpha, grad.dtheta, p.theta);
    ++r.iterations;
  }
  r.theta = std::move(p.theta);
  return r;
}

}  // namespace bome
