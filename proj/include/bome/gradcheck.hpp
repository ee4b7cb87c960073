#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "bome/bome_step.hpp"
#include "bome/core.hpp"
#include "bome/inner_solver.hpp"

namespace bome {

using ScalarFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t worst_point = 0;
  std::size_t points_checked = 0;
  /// Indices of probe points where fn or grad was not finite.
  std::vector<std::size_t> nonfinite_points;
  bool passed = true;

  std::string to_string() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "points  max_rel_error  worst_point  worst_coord  nonfinite  status\n"
                  "%6zu  %13.3e  %11zu  %11zu  %9zu  %s\n",
                  points_checked, max_rel_error, worst_point, worst_coordinate,
                  nonfinite_points.size(), passed ? "PASS" : "FAIL");
    return buf;
  }
};

/// Central-difference check of `grad` against `fn`, coordinate by coordinate.
/// Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
inline GradCheckReport check_gradient(const ScalarFn& fn, const GradientFn& grad,
                                      const std::vector<Vector>& points, double h = 1e-5,
                                      double rel_tol = 1e-5) {
  if (!(h > 0.0)) throw ConfigError("check_gradient: h must be > 0");
  GradCheckReport rep;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const Vector& x = points[pi];
    const Vector analytic = grad(x);
    bool finite = analytic.size() == x.size() && all_finite(analytic);
    Vector probe = x;
    for (std::size_t i = 0; finite && i < x.size(); ++i) {
      probe[i] = x[i] + h;
      const double fp = fn(probe);
      probe[i] = x[i] - h;
      const double fm = fn(probe);
      probe[i] = x[i];
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        finite = false;
        break;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic[i] - numeric) / denom;
      if (err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_coordinate = i;
        rep.worst_point = pi;
      }
    }
    if (!finite) rep.nonfinite_points.push_back(pi);
    ++rep.points_checked;
  }
  rep.passed = rep.nonfinite_points.empty() && rep.max_rel_error < rel_tol;
  return rep;
}

enum class Objective { Outer, Inner };

/// f or g of the oracle as a function of the flat vector [v; theta].
inline ScalarFn joint_value_fn(const BilevelOracle& oracle, Objective which) {
  const auto eval = which == Objective::Outer ? oracle.eval_f : oracle.eval_g;
  const std::size_t m = oracle.dim_v;
  return [eval, m](const Vector& x) { return eval(JointPoint::from_flat(x, m)); };
}

inline GradientFn joint_gradient_fn(const BilevelOracle& oracle, Objective which) {
  const auto grad = which == Objective::Outer ? oracle.grad_f : oracle.grad_g;
  const std::size_t m = oracle.dim_v;
  return [grad, m](const Vector& x) { return grad(JointPoint::from_flat(x, m)).flat(); };
}

/// Checks grad_f and grad_g of the oracle; returns the worse of the two.
inline GradCheckReport check_oracle_gradients(const BilevelOracle& oracle,
                                              const std::vector<JointPoint>& points,
                                              double h = 1e-5, double rel_tol = 1e-5) {
  std::vector<Vector> flat;
  flat.reserve(points.size());
  for (const auto& p : points) flat.push_back(p.flat());
  GradCheckReport rf = check_gradient(joint_value_fn(oracle, Objective::Outer),
                                      joint_gradient_fn(oracle, Objective::Outer), flat, h, rel_tol);
  GradCheckReport rg = check_gradient(joint_value_fn(oracle, Objective::Inner),
                                      joint_gradient_fn(oracle, Objective::Inner), flat, h, rel_tol);
  GradCheckReport& worse = rf.max_rel_error >= rg.max_rel_error ? rf : rg;
  GradCheckReport out = worse;
  out.passed = rf.passed && rg.passed;
  out.nonfinite_points = rf.nonfinite_points;
  out.nonfinite_points.insert(out.nonfinite_points.end(), rg.nonfinite_points.begin(),
                              rg.nonfinite_points.end());
  return out;
}

struct PlugInErrorRow {
  int T = 0;
  double mean_error = 0.0;
};

/// Mean over `points` of ||grad q-hat - grad q|| for each T, where grad q uses
/// the exact inner optimum.
inline std::vector<PlugInErrorRow> check_plug_in_estimator(const BilevelOracle& oracle,
                                                           const std::vector<JointPoint>& points,
                                                           const std::vector<int>& T_values,
                                                           double alpha) {
  if (!oracle.exact_inner_opt)
    throw MissingOracleCapability("check_plug_in_estimator: oracle '" + oracle.name +
                                  "' has no exact inner optimum");
  std::vector<JointGradient> exact;
  exact.reserve(points.size());
  for (const auto& p : points)
    exact.push_back(grad_q_hat(oracle, p.v, p.theta, oracle.exact_inner_opt(p.v)));

  std::vector<PlugInErrorRow> rows;
  for (int T : T_values) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      const InnerResult inner = inner_descent(oracle, p.v, p.theta, T, alpha);
      JointGradient diff = grad_q_hat(oracle, p.v, p.theta, inner.theta_T);
      diff.add_scaled(-1.0, exact[i]);
      total += diff.norm();
    }
    rows.push_back({T, points.empty() ? 0.0 : total / static_cast<double>(points.size())});
  }
  return rows;
}

inline std::string format_plug_in_table(const std::vector<PlugInErrorRow>& rows) {
  std::string out = "     T  mean ||grad_qhat - grad_q||\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%6d  %.6e\n", r.T, r.mean_error);
    out += buf;
  }
  return out;
}

}  // namespace bome
