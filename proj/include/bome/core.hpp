#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bome {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid solver or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced during an update.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The oracle lacks an optional capability an operation needs
/// (e.g. a closed-form inner minimizer).
class MissingOracleCapability : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Dense vector helpers
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
  Vector out(a.begin(), a.end());
  axpy(-1.0, b, out);
  return out;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Outer variable v (length m) and inner variable theta (length n).
struct JointPoint {
  Vector v;
  Vector theta;

  std::size_t dim_v() const { return v.size(); }
  std::size_t dim_theta() const { return theta.size(); }

  bool is_valid() const {
    return !v.empty() && !theta.empty() && all_finite(v) && all_finite(theta);
  }

  /// Concatenation [v; theta].
  Vector flat() const {
    Vector out(v);
    out.insert(out.end(), theta.begin(), theta.end());
    return out;
  }

  static JointPoint from_flat(std::span<const double> x, std::size_t m) {
    return {Vector(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m)),
            Vector(x.begin() + static_cast<std::ptrdiff_t>(m), x.end())};
  }

  friend bool operator==(const JointPoint&, const JointPoint&) = default;
};

/// Gradient w.r.t. (v, theta), split into blocks.
struct JointGradient {
  Vector dv;
  Vector dtheta;

  static JointGradient zeros(std::size_t m, std::size_t n) { return {Vector(m, 0.0), Vector(n, 0.0)}; }

  double squared_norm() const { return bome::squared_norm(dv) + bome::squared_norm(dtheta); }
  double norm() const { return std::sqrt(squared_norm()); }

  bool is_finite() const { return all_finite(dv) && all_finite(dtheta); }

  bool matches(const JointPoint& p) const {
    return dv.size() == p.v.size() && dtheta.size() == p.theta.size();
  }

  Vector flat() const {
    Vector out(dv);
    out.insert(out.end(), dtheta.begin(), dtheta.end());
    return out;
  }

  // this += alpha * other
  JointGradient& add_scaled(double alpha, const JointGradient& other) {
    axpy(alpha, other.dv, dv);
    axpy(alpha, other.dtheta, dtheta);
    return *this;
  }

  friend bool operator==(const JointGradient&, const JointGradient&) = default;
};

inline double dot(const JointGradient& a, const JointGradient& b) {
  return dot(a.dv, b.dv) + dot(a.dtheta, b.dtheta);
}

/// Value function g*(v) = min_theta g(v, theta) together with its gradient
/// in v. Used by problems whose inner solution set is not a single point.
struct ValueFunction {
  double value = 0.0;
  Vector grad_v;
};

/// Constants of the problem class. Optional, and read only by tests and
/// config validation, never by the update rule.
struct ProblemMetadata {
  std::optional<double> smoothness_L;
  std::optional<double> pl_constant_kappa;
  std::optional<double> bound_M;
  std::optional<JointPoint> known_optimum;
  std::optional<double> known_f_opt;
  /// Inner-variable optimum for problems whose optimal v lies at infinity
  /// (e.g. a softmax saturating onto a vertex).
  std::optional<Vector> known_theta_opt;

  bool constants_positive() const {
    auto ok = [](const std::optional<double>& c) { return !c || *c > 0.0; };
    return ok(smoothness_L) && ok(pl_constant_kappa) && ok(bound_M);
  }
};

/// Evaluators for the bilevel problem
///   min_{v,theta} f(v,theta)  s.t.  theta in argmin g(v, .)
struct BilevelOracle {
  std::string name;
  std::size_t dim_v = 0;
  std::size_t dim_theta = 0;

  std::function<double(const JointPoint&)> eval_f;
  std::function<JointGradient(const JointPoint&)> grad_f;
  std::function<double(const JointPoint&)> eval_g;
  std::function<JointGradient(const JointPoint&)> grad_g;

  /// Closed-form theta*(v), when the problem admits one.
  std::function<Vector(const Vector&)> exact_inner_opt;
  /// Exact g*(v) and its gradient, for problems without a unique minimizer.
  std::function<ValueFunction(const Vector&)> exact_value;

  std::optional<ProblemMetadata> metadata;

  bool has_exact_inner_opt() const { return static_cast<bool>(exact_inner_opt); }
  bool has_exact_value() const { return static_cast<bool>(exact_value) || has_exact_inner_opt(); }
};

enum class BarrierKind { GradNormSq, Value };

inline const char* to_string(BarrierKind k) {
  return k == BarrierKind::GradNormSq ? "grad_norm_sq" : "value";
}

struct OuterSteps {
  double xi_v = 0.0;
  double xi_theta = 0.0;
};

struct SolverConfig {
  double outer_step_xi = 0.05;
  double inner_step_alpha = 0.05;
  int inner_iters_T = 10;
  double eta = 0.5;
  BarrierKind barrier_kind = BarrierKind::GradNormSq;
  int max_outer_iters_K = 1000;
  std::optional<OuterSteps> separate_outer_steps;
  double momentum_beta = 0.0;
  int kkt_eval_every = 1;
  std::optional<double> stop_kkt_tol;
  std::uint64_t rng_seed = 0;

  double xi_v() const { return separate_outer_steps ? separate_outer_steps->xi_v : outer_step_xi; }
  double xi_theta() const {
    return separate_outer_steps ? separate_outer_steps->xi_theta : outer_step_xi;
  }

  /// Sets xi and, as in the default algorithm, alpha = xi.
  static SolverConfig with_step(double xi) {
    SolverConfig c;
    c.outer_step_xi = xi;
    c.inner_step_alpha = xi;
    return c;
  }
};

/// One outer iteration of a run, evaluated at the pre-update point.
struct StepDiagnostics {
  int iter_k = 0;
  double f_value = 0.0;
  double q_hat = 0.0;
  double lambda_k = 0.0;
  double phi_k = 0.0;
  double delta_norm = 0.0;
  double grad_qhat_norm = 0.0;
  std::optional<double> kkt_value;
  /// Proxy measure recorded next to an exact one, for comparison.
  std::optional<double> kkt_proxy_value;
  std::int64_t wall_time_micros = 0;
};

/// Checks hard constraints (throws ConfigError listing every violation) and
/// returns soft warnings about step sizes exceeding 1/L.
inline std::vector<std::string> validate_config(const SolverConfig& cfg,
                                                const std::optional<ProblemMetadata>& meta = {}) {
  std::vector<std::string> errors;
  auto positive = [&](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) errors.push_back(std::string(name) + " must be > 0");
  };
  positive(cfg.outer_step_xi, "xi");
  positive(cfg.inner_step_alpha, "alpha");
  positive(cfg.eta, "eta");
  if (cfg.inner_iters_T < 0) errors.emplace_back("T must be >= 0");
  if (cfg.max_outer_iters_K < 1) errors.emplace_back("iters must be >= 1");
  if (!(cfg.momentum_beta >= 0.0 && cfg.momentum_beta < 1.0))
    errors.emplace_back("momentum must lie in [0, 1)");
  if (cfg.kkt_eval_every < 1) errors.emplace_back("kkt_every must be >= 1");
  if (cfg.stop_kkt_tol && !(*cfg.stop_kkt_tol > 0.0)) errors.emplace_back("stop_kkt_tol must be > 0");
  if (cfg.separate_outer_steps) {
    positive(cfg.separate_outer_steps->xi_v, "xi_v");
    positive(cfg.separate_outer_steps->xi_theta, "xi_theta");
  }
  if (!errors.empty()) {
    std::string msg = "invalid solver configuration:";
    for (const auto& e : errors) msg += " " + e + ";";
    throw ConfigError(msg);
  }

  std::vector<std::string> warnings;
  if (!meta || !meta->smoothness_L) return warnings;
  const double inv_L = 1.0 / *meta->smoothness_L;
  auto check = [&](double step, const char* name) {
    if (step > inv_L)
      warnings.push_back(std::string(name) + " > 1/L (" + std::to_string(step) + " > " +
                         std::to_string(inv_L) + ")");
  };
  check(cfg.outer_step_xi, "xi");
  check(cfg.inner_step_alpha, "alpha");
  if (cfg.separate_outer_steps) {
    check(cfg.separate_outer_steps->xi_v, "xi_v");
    check(cfg.separate_outer_steps->xi_theta, "xi_theta");
  }
  return warnings;
}

}  // namespace bome
