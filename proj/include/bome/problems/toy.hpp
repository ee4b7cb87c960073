#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "bome/core.hpp"
#include "bome/linalg.hpp"

namespace bome::problems {

/// Softmax with max-subtraction.
inline Vector softmax(std::span<const double> v) {
  Vector s(v.begin(), v.end());
  if (s.empty()) return s;
  const double mx = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (auto& x : s) {
    x = std::exp(x - mx);
    total += x;
  }
  for (auto& x : s) x /= total;
  return s;
}

// ---------------------------------------------------------------------------
// Coreset: closest point to x0 inside conv{x1..xk}
//   f = ||theta - x0||^2,  g = ||theta - X softmax(v)||^2
// ---------------------------------------------------------------------------

struct CoresetProblem {
  Vector target_x0{3.0, -2.0};
  /// 2 x k, one vertex per column.
  Matrix vertices_X = default_vertices();

  static Matrix default_vertices() {
    Matrix X(2, 4);
    const std::array<std::array<double, 2>, 4> cols{{{1, 3}, {3, 1}, {-2, 2}, {-3, 2}}};
    for (std::size_t j = 0; j < 4; ++j) {
      X(0, j) = cols[j][0];
      X(1, j) = cols[j][1];
    }
    return X;
  }

  std::size_t num_vertices() const { return vertices_X.cols(); }

  /// Three standard initial inner points; v0 = 0.
  static std::array<Vector, 3> start_thetas() { return {{{0.0, 3.0}, {-3.0, 1.0}, {3.5, 1.0}}}; }
};

inline BilevelOracle coreset_oracle(const CoresetProblem& prob) {
  const Matrix X = prob.vertices_X;
  const Vector x0 = prob.target_x0;
  const std::size_t k = X.cols();
  const std::size_t d = X.rows();

  auto center = [X](const Vector& v) { return matvec(X, softmax(v)); };

  BilevelOracle o;
  o.name = "coreset";
  o.dim_v = k;
  o.dim_theta = d;
  o.eval_f = [x0](const JointPoint& p) { return squared_norm(subtract(p.theta, x0)); };
  o.grad_f = [x0, k](const JointPoint& p) {
    JointGradient g{Vector(k, 0.0), subtract(p.theta, x0)};
    for (auto& x : g.dtheta) x *= 2.0;
    return g;
  };
  o.eval_g = [center](const JointPoint& p) { return squared_norm(subtract(p.theta, center(p.v))); };
  o.grad_g = [X](const JointPoint& p) {
    const Vector s = softmax(p.v);
    Vector r = subtract(p.theta, matvec(X, s));
    // grad_v = -2 J^T X^T r with J = diag(s) - s s^T (symmetric)
    const Vector u = matvec_t(X, r);
    const double su = dot(s, u);
    Vector dv(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) dv[i] = -2.0 * s[i] * (u[i] - su);
    for (auto& x : r) x *= 2.0;
    return JointGradient{std::move(dv), std::move(r)};
  };
  o.exact_inner_opt = center;

  ProblemMetadata meta;
  const bool is_default =
      prob.target_x0 == Vector{3.0, -2.0} && prob.vertices_X == CoresetProblem::default_vertices();
  if (is_default) {
    // Projection of x0 = (3,-2) onto the hull is the vertex (3,1).
    meta.known_theta_opt = Vector{3.0, 1.0};
    meta.known_f_opt = 9.0;
  }
  o.metadata = meta;
  return o;
}

// ---------------------------------------------------------------------------
// Bilinear mini-max: min v*theta s.t. theta in argmax v*theta',
// with the inner argmax written as argmin of -v*theta.
// ---------------------------------------------------------------------------

inline BilevelOracle minimax_oracle() {
  BilevelOracle o;
  o.name = "minimax";
  o.dim_v = 1;
  o.dim_theta = 1;
  o.eval_f = [](const JointPoint& p) { return p.v[0] * p.theta[0]; };
  o.grad_f = [](const JointPoint& p) { return JointGradient{{p.theta[0]}, {p.v[0]}}; };
  o.eval_g = [](const JointPoint& p) { return -p.v[0] * p.theta[0]; };
  o.grad_g = [](const JointPoint& p) { return JointGradient{{-p.theta[0]}, {-p.v[0]}}; };

  ProblemMetadata meta;
  meta.smoothness_L = 1.0;
  meta.known_optimum = JointPoint{{0.0}, {0.0}};
  meta.known_f_opt = 0.0;
  o.metadata = meta;
  return o;
}

// ---------------------------------------------------------------------------
// Degenerate inner problem (no unique inner minimizer):
//   f = ||theta - (v, 1)||^2,  g = (theta_1 - v)^2,  g*(v) = 0
// ---------------------------------------------------------------------------

inline BilevelOracle lls_oracle() {
  BilevelOracle o;
  o.name = "lls";
  o.dim_v = 1;
  o.dim_theta = 2;
  o.eval_f = [](const JointPoint& p) {
    const double a = p.theta[0] - p.v[0];
    const double b = p.theta[1] - 1.0;
    return a * a + b * b;
  };
  o.grad_f = [](const JointPoint& p) {
    const double a = p.theta[0] - p.v[0];
    return JointGradient{{-2.0 * a}, {2.0 * a, 2.0 * (p.theta[1] - 1.0)}};
  };
  o.eval_g = [](const JointPoint& p) {
    const double a = p.theta[0] - p.v[0];
    return a * a;
  };
  o.grad_g = [](const JointPoint& p) {
    const double a = p.theta[0] - p.v[0];
    return JointGradient{{-2.0 * a}, {2.0 * a, 0.0}};
  };
  o.exact_value = [](const Vector& v) { return ValueFunction{0.0, Vector(v.size(), 0.0)}; };

  ProblemMetadata meta;
  meta.smoothness_L = 4.0;
  meta.known_optimum = JointPoint{{1.0}, {1.0, 1.0}};
  meta.known_f_opt = 0.0;
  o.metadata = meta;
  return o;
}

}  // namespace bome::problems
