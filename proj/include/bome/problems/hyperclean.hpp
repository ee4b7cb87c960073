#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "bome/core.hpp"
#include "bome/inner_solver.hpp"
#include "bome/linalg.hpp"
#include "bome/problems/dataset.hpp"

namespace bome::problems {

/// Data hyper-cleaning with a linear softmax classifier theta = (W, b):
///   f = mean validation cross-entropy
///   g = sum_i clip(v_i, [0,1]) * loss_i(theta) + c ||theta||^2
struct HypercleanProblem {
  Matrix train_features;  // m_train x p
  std::vector<int> train_labels;  // possibly corrupted
  Matrix val_features;
  std::vector<int> val_labels;
  double ridge_c = 0.001;
  std::size_t num_classes = 2;
  std::vector<bool> corruption_mask;  // ground truth, for evaluation only
  std::vector<int> true_train_labels;

  std::size_t num_features() const { return train_features.cols(); }
  std::size_t num_train() const { return train_features.rows(); }
  std::size_t theta_size() const { return num_classes * (num_features() + 1); }

  /// Upper bound on the Lipschitz constant of grad_theta g when every weight
  /// is at most 1: lambda_max(Xa^T Xa) / 2 + 2c with Xa = [X, 1].
  double inner_smoothness() const {
    Matrix Xa(num_train(), num_features() + 1);
    for (std::size_t i = 0; i < num_train(); ++i) {
      for (std::size_t j = 0; j < num_features(); ++j) Xa(i, j) = train_features(i, j);
      Xa(i, num_features()) = 1.0;
    }
    return 0.5 * max_eigenvalue_psd(gram(Xa)) + 2.0 * ridge_c;
  }

  void export_train_csv(const std::string& path) const {
    std::vector<double> labels(train_labels.begin(), train_labels.end());
    write_dataset_csv(path, train_features, labels, corruption_mask);
  }
};

inline double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

/// Derivative of clip01: 1 strictly inside (0,1), 0 elsewhere.
inline double clip01_grad(double x) { return (x > 0.0 && x < 1.0) ? 1.0 : 0.0; }

namespace detail {

inline void check_classes(const std::vector<int>& labels, std::size_t num_classes, const char* split) {
  std::vector<bool> seen(num_classes, false);
  for (int y : labels) seen[static_cast<std::size_t>(y)] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw ConfigError(std::string("hyperclean: a class is absent from the ") + split + " split");
}

// Cross-entropy of one sample; if `dlogits` is non-null it receives
// softmax(z) - onehot(y).
inline double sample_loss(std::span<const double> theta, std::span<const double> x, int y,
                          std::size_t num_classes, Vector* dlogits) {
  const std::size_t p = x.size();
  Vector z(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c)
    z[c] = dot(theta.subspan(c * p, p), x) + theta[num_classes * p + c];
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& e : z) {
    e = std::exp(e - mx);
    total += e;
  }
  const auto yi = static_cast<std::size_t>(y);
  const double loss = std::log(total) - std::log(z[yi]);
  if (dlogits) {
    dlogits->resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) (*dlogits)[c] = z[c] / total;
    (*dlogits)[yi] -= 1.0;
  }
  return loss;
}

// Accumulates weight * d loss / d theta into grad.
inline void add_sample_grad(std::span<double> grad, std::span<const double> x, const Vector& dlogits,
                            double weight) {
  const std::size_t p = x.size();
  const std::size_t k = dlogits.size();
  for (std::size_t c = 0; c < k; ++c) {
    axpy(weight * dlogits[c], x, grad.subspan(c * p, p));
    grad[k * p + c] += weight * dlogits[c];
  }
}

}  // namespace detail

/// Class-balanced Gaussian clusters. Exactly round(corrupt_frac * m_train)
/// training labels are replaced by a uniformly drawn wrong class.
inline HypercleanProblem make_synthetic_hyperclean(std::uint64_t seed, std::size_t m_train,
                                                   std::size_t m_val, std::size_t p,
                                                   double corrupt_frac, std::size_t num_classes = 2,
                                                   double separation = 0.8) {
  if (!(corrupt_frac >= 0.0 && corrupt_frac < 1.0))
    throw ConfigError("hyperclean: corrupt_frac must lie in [0, 1)");
  if (num_classes < 2) throw ConfigError("hyperclean: need at least 2 classes");
  if (p == 0) throw ConfigError("hyperclean: need at least one feature");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix means(num_classes, p);
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t j = 0; j < p; ++j) means(c, j) = separation * normal(rng);

  auto sample = [&](std::size_t m, Matrix& X, std::vector<int>& y) {
    y.resize(m);
    for (std::size_t i = 0; i < m; ++i) y[i] = static_cast<int>(i % num_classes);
    std::shuffle(y.begin(), y.end(), rng);
    X = Matrix(m, p);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p; ++j)
        X(i, j) = means(static_cast<std::size_t>(y[i]), j) + normal(rng);
  };

  HypercleanProblem prob;
  prob.num_classes = num_classes;
  sample(m_train, prob.train_features, prob.true_train_labels);
  sample(m_val, prob.val_features, prob.val_labels);

  prob.train_labels = prob.true_train_labels;
  prob.corruption_mask.assign(m_train, false);
  std::vector<std::size_t> order(m_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_corrupt = static_cast<std::size_t>(std::llround(corrupt_frac * static_cast<double>(m_train)));
  std::uniform_int_distribution<int> shift(1, static_cast<int>(num_classes) - 1);
  for (std::size_t k = 0; k < n_corrupt; ++k) {
    const std::size_t i = order[k];
    prob.train_labels[i] = (prob.true_train_labels[i] + shift(rng)) % static_cast<int>(num_classes);
    prob.corruption_mask[i] = true;
  }

  detail::check_classes(prob.train_labels, num_classes, "train");
  detail::check_classes(prob.val_labels, num_classes, "validation");
  return prob;
}

inline BilevelOracle hyperclean_oracle(const HypercleanProblem& prob) {
  const std::size_t m = prob.num_train();
  const std::size_t k = prob.num_classes;
  const std::size_t n = prob.theta_size();

  BilevelOracle o;
  o.name = "hyperclean";
  o.dim_v = m;
  o.dim_theta = n;

  // Sums over samples accumulate in long double so that a change in a single
  // term is not lost in the rounding of the running total.
  o.eval_f = [prob, k](const JointPoint& pt) {
    long double s = 0.0L;
    const std::size_t mv = prob.val_features.rows();
    for (std::size_t i = 0; i < mv; ++i)
      s += detail::sample_loss(pt.theta, prob.val_features.row(i), prob.val_labels[i], k, nullptr);
    return static_cast<double>(s / static_cast<long double>(mv));
  };
  o.grad_f = [prob, k, m, n](const JointPoint& pt) {
    JointGradient g{Vector(m, 0.0), Vector(n, 0.0)};
    const std::size_t mv = prob.val_features.rows();
    const double w = 1.0 / static_cast<double>(mv);
    Vector dl;
    for (std::size_t i = 0; i < mv; ++i) {
      detail::sample_loss(pt.theta, prob.val_features.row(i), prob.val_labels[i], k, &dl);
      detail::add_sample_grad(g.dtheta, prob.val_features.row(i), dl, w);
    }
    return g;
  };
  o.eval_g = [prob, k, m](const JointPoint& pt) {
    long double s = prob.ridge_c * squared_norm(pt.theta);
    for (std::size_t i = 0; i < m; ++i) {
      const double w = clip01(pt.v[i]);
      if (w == 0.0) continue;
      s += static_cast<long double>(w) *
           detail::sample_loss(pt.theta, prob.train_features.row(i), prob.train_labels[i], k, nullptr);
    }
    return static_cast<double>(s);
  };
  o.grad_g = [prob, k, m](const JointPoint& pt) {
    JointGradient g{Vector(m, 0.0), pt.theta};
    for (auto& x : g.dtheta) x *= 2.0 * prob.ridge_c;
    Vector dl;
    for (std::size_t i = 0; i < m; ++i) {
      const double w = clip01(pt.v[i]);
      const double dw = clip01_grad(pt.v[i]);
      if (w == 0.0 && dw == 0.0) continue;
      const double loss =
          detail::sample_loss(pt.theta, prob.train_features.row(i), prob.train_labels[i], k, &dl);
      g.dv[i] = dw * loss;
      if (w != 0.0) detail::add_sample_grad(g.dtheta, prob.train_features.row(i), dl, w);
    }
    return g;
  };

  ProblemMetadata meta;
  meta.smoothness_L = prob.inner_smoothness();
  o.metadata = meta;
  return o;
}

/// Model fitted on the (corrupted) training set with uniform weights `v_init`,
/// as a warm start for theta.
inline Vector hyperclean_pretrained_theta(const HypercleanProblem& prob, double v_init, double alpha,
                                          int steps) {
  const BilevelOracle o = hyperclean_oracle(prob);
  return inner_descent(o, Vector(prob.num_train(), v_init), Vector(prob.theta_size(), 0.0), steps, alpha)
      .theta_T;
}

}  // namespace bome::problems
