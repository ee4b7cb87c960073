#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "bome/core.hpp"
#include "bome/linalg.hpp"
#include "bome/problems/dataset.hpp"

namespace bome::problems {

/// Learnable per-feature ridge penalty:
///   f = ||B theta - y_val||^2
///   g = ||A theta - y_train||^2 + ||diag(exp(v)) theta||^2
struct RidgeRegProblem {
  Matrix train_A;
  Vector train_y;
  Matrix val_B;
  Vector val_y;

  std::size_t num_features() const { return train_A.cols(); }

  /// Lipschitz constant of grad_theta g over the box |v_i| <= v_bound.
  double inner_smoothness(double v_bound) const {
    return 2.0 * (max_eigenvalue_psd(gram(train_A)) + std::exp(2.0 * v_bound));
  }

  /// Strong-convexity modulus of g(v, .) over v_i >= -v_bound.
  double inner_strong_convexity(double v_bound) const {
    const Matrix G = gram(train_A);
    const double top = max_eigenvalue_psd(G);
    Matrix shifted = G;
    for (std::size_t i = 0; i < G.rows(); ++i)
      for (std::size_t j = 0; j < G.cols(); ++j) shifted(i, j) = (i == j ? top : 0.0) - G(i, j);
    const double lmin = std::max(0.0, top - max_eigenvalue_psd(shifted));
    return 2.0 * (lmin + std::exp(-2.0 * v_bound));
  }

  void export_train_csv(const std::string& path) const {
    write_dataset_csv(path, train_A, train_y, {});
  }
};

/// Gaussian design with rows scaled by design_scale/sqrt(m), so A^T A is close
/// to design_scale^2 I; targets from a random linear model plus noise.
/// The default keeps the data term comparable to the penalty for |v| <= 1.
inline RidgeRegProblem make_synthetic_ridge(std::uint64_t seed, std::size_t m_train = 200,
                                            std::size_t m_val = 100, std::size_t p = 5,
                                            double noise = 0.5, double design_scale = 2.0) {
  if (m_train == 0 || m_val == 0 || p == 0) throw ConfigError("ridge: sizes must be positive");
  if (!(design_scale > 0.0)) throw ConfigError("ridge: design_scale must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector w(p);
  for (auto& x : w) x = normal(rng);

  auto fill = [&](std::size_t m, Matrix& A, Vector& y) {
    const double scale = design_scale / std::sqrt(static_cast<double>(m));
    A = Matrix(m, p);
    y.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < p; ++j) A(i, j) = scale * normal(rng);
      y[i] = dot(A.row(i), w) + noise * scale * normal(rng);
    }
  };
  RidgeRegProblem prob;
  fill(m_train, prob.train_A, prob.train_y);
  fill(m_val, prob.val_B, prob.val_y);
  return prob;
}

/// theta*(v) = (A^T A + diag(exp(2v)))^{-1} A^T y
inline Vector ridge_inner_opt(const RidgeRegProblem& prob, const Vector& v) {
  Matrix S = gram(prob.train_A);
  for (std::size_t i = 0; i < S.rows(); ++i) S(i, i) += std::exp(2.0 * v[i]);
  return cholesky_solve(std::move(S), matvec_t(prob.train_A, prob.train_y));
}

inline BilevelOracle ridge_oracle(const RidgeRegProblem& prob) {
  const std::size_t p = prob.num_features();
  BilevelOracle o;
  o.name = "ridge";
  o.dim_v = p;
  o.dim_theta = p;

  o.eval_f = [prob](const JointPoint& pt) {
    return squared_norm(subtract(matvec(prob.val_B, pt.theta), prob.val_y));
  };
  o.grad_f = [prob, p](const JointPoint& pt) {
    Vector r = subtract(matvec(prob.val_B, pt.theta), prob.val_y);
    Vector dtheta = matvec_t(prob.val_B, r);
    for (auto& x : dtheta) x *= 2.0;
    return JointGradient{Vector(p, 0.0), std::move(dtheta)};
  };
  o.eval_g = [prob](const JointPoint& pt) {
    double g = squared_norm(subtract(matvec(prob.train_A, pt.theta), prob.train_y));
    for (std::size_t i = 0; i < pt.theta.size(); ++i)
      g += std::exp(2.0 * pt.v[i]) * pt.theta[i] * pt.theta[i];
    return g;
  };
  o.grad_g = [prob, p](const JointPoint& pt) {
    Vector r = subtract(matvec(prob.train_A, pt.theta), prob.train_y);
    Vector dtheta = matvec_t(prob.train_A, r);
    Vector dv(p);
    for (std::size_t i = 0; i < p; ++i) {
      const double w = std::exp(2.0 * pt.v[i]);
      dtheta[i] = 2.0 * dtheta[i] + 2.0 * w * pt.theta[i];
      dv[i] = 2.0 * w * pt.theta[i] * pt.theta[i];
    }
    return JointGradient{std::move(dv), std::move(dtheta)};
  };
  o.exact_inner_opt = [prob](const Vector& v) { return ridge_inner_opt(prob, v); };

  ProblemMetadata meta;
  // Declared for the box |v_i| <= 1.
  meta.smoothness_L = prob.inner_smoothness(1.0);
  meta.pl_constant_kappa = 2.0 * prob.inner_strong_convexity(1.0);
  o.metadata = meta;
  return o;
}

}  // namespace bome::problems
