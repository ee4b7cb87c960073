#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bome/core.hpp"
#include "bome/problems/hyperclean.hpp"
#include "bome/problems/ridge.hpp"
#include "bome/problems/toy.hpp"

namespace bome::problems {

/// Numeric problem parameters by name plus the data seed.
struct ProblemParams {
  std::map<std::string, double> values;
  std::uint64_t seed = 0;
};

struct ProblemInfo {
  std::string name;
  std::string description;
  std::vector<std::string> parameters;
};

/// A ready-to-run problem: oracle, named start points (the first is the
/// default) and a solver configuration suited to it.
struct ProblemInstance {
  BilevelOracle oracle;
  std::vector<std::pair<std::string, JointPoint>> starts;
  SolverConfig recommended;
  /// Writes the training split as CSV; empty for problems without data.
  std::function<void(const std::string&)> export_data;
  /// Samples points at which every gradient is smooth.
  std::function<JointPoint(std::mt19937_64&)> sample_smooth_point;

  const JointPoint& start(const std::string& name) const {
    for (const auto& [n, p] : starts)
      if (n == name) return p;
    std::string known;
    for (const auto& s : starts) known += " " + s.first;
    throw ConfigError("unknown start preset '" + name + "' for problem '" + oracle.name +
                      "' (known:" + known + ")");
  }
  const JointPoint& default_start() const { return starts.front().second; }
};

inline const std::vector<ProblemInfo>& problem_catalog() {
  static const std::vector<ProblemInfo> catalog{
      {"coreset", "closest point to x0=(3,-2) in the hull of four vertices (softmax weights)", {}},
      {"minimax", "bilinear game min v*theta s.t. theta in argmax v*theta'", {}},
      {"lls", "degenerate inner problem (theta_1 - v)^2 with a line of minimizers", {}},
      {"ridge",
       "learnable per-feature ridge penalty on synthetic linear regression",
       {"m_train", "m_val", "features", "noise", "design_scale"}},
      {"hyperclean",
       "per-example weights for a softmax classifier trained on corrupted labels",
       {"m_train", "m_val", "features", "classes", "corrupt_frac", "ridge_c", "separation"}},
  };
  return catalog;
}

namespace detail {

class ParamReader {
 public:
  ParamReader(const ProblemParams& p, const ProblemInfo& info) : params_(p) {
    for (const auto& [k, v] : p.values) {
      (void)v;
      if (std::find(info.parameters.begin(), info.parameters.end(), k) == info.parameters.end())
        throw ConfigError("unknown parameter '" + k + "' for problem '" + info.name + "'");
    }
  }
  double get(const std::string& key, double fallback) const {
    auto it = params_.values.find(key);
    return it == params_.values.end() ? fallback : it->second;
  }
  std::size_t get_count(const std::string& key, std::size_t fallback) const {
    const double x = get(key, static_cast<double>(fallback));
    if (!(x >= 1.0) || x != std::floor(x)) throw ConfigError("parameter '" + key + "' must be a positive integer");
    return static_cast<std::size_t>(x);
  }

 private:
  const ProblemParams& params_;
};

inline Vector normal_vector(std::mt19937_64& rng, std::size_t n, double sd) {
  std::normal_distribution<double> d(0.0, sd);
  Vector x(n);
  for (auto& e : x) e = d(rng);
  return x;
}

inline Vector uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector x(n);
  for (auto& e : x) e = d(rng);
  return x;
}

/// Magnitudes in [lo, hi] with random signs. Keeps probe coordinates away from
/// zero where a gradient entry vanishes quadratically and its relative error
/// is dominated by round-off.
inline Vector signed_magnitude_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::bernoulli_distribution sign(0.5);
  Vector x(n);
  for (auto& e : x) e = sign(rng) ? d(rng) : -d(rng);
  return x;
}

}  // namespace detail

inline const ProblemInfo& problem_info(const std::string& name) {
  for (const auto& info : problem_catalog())
    if (info.name == name) return info;
  throw ConfigError("unknown problem '" + name + "'");
}

inline ProblemInstance make_problem(const std::string& name, const ProblemParams& params = {}) {
  const ProblemInfo& info = problem_info(name);
  const detail::ParamReader reader(params, info);
  ProblemInstance inst;

  if (name == "coreset") {
    const CoresetProblem prob;
    inst.oracle = coreset_oracle(prob);
    const auto thetas = CoresetProblem::start_thetas();
    for (std::size_t i = 0; i < thetas.size(); ++i)
      inst.starts.emplace_back("start" + std::to_string(i + 1),
                               JointPoint{Vector(prob.num_vertices(), 0.0), thetas[i]});
    inst.recommended = SolverConfig::with_step(0.05);
    inst.recommended.max_outer_iters_K = 5000;
    inst.sample_smooth_point = [k = prob.num_vertices()](std::mt19937_64& rng) {
      return JointPoint{detail::normal_vector(rng, k, 1.0), detail::normal_vector(rng, 2, 2.0)};
    };
  } else if (name == "minimax") {
    inst.oracle = minimax_oracle();
    inst.starts.emplace_back("default", JointPoint{{1.0}, {1.0}});
    inst.recommended = SolverConfig::with_step(0.05);
    inst.recommended.max_outer_iters_K = 2000;
    inst.sample_smooth_point = [](std::mt19937_64& rng) {
      return JointPoint{detail::normal_vector(rng, 1, 1.0), detail::normal_vector(rng, 1, 1.0)};
    };
  } else if (name == "lls") {
    inst.oracle = lls_oracle();
    inst.starts.emplace_back("origin", JointPoint{{0.0}, {0.0, 0.0}});
    inst.starts.emplace_back("offset", JointPoint{{2.0}, {-1.0, 3.0}});
    inst.recommended = SolverConfig::with_step(0.5);
    inst.recommended.max_outer_iters_K = 2000;
    inst.sample_smooth_point = [](std::mt19937_64& rng) {
      return JointPoint{detail::normal_vector(rng, 1, 1.0), detail::normal_vector(rng, 2, 1.0)};
    };
  } else if (name == "ridge") {
    const RidgeRegProblem prob = make_synthetic_ridge(
        params.seed, reader.get_count("m_train", 200), reader.get_count("m_val", 100),
        reader.get_count("features", 5), reader.get("noise", 0.5), reader.get("design_scale", 2.0));
    inst.oracle = ridge_oracle(prob);
    const std::size_t p = prob.num_features();
    inst.starts.emplace_back("default", JointPoint{Vector(p, 0.0), Vector(p, 0.0)});
    inst.recommended = SolverConfig::with_step(1.0 / *inst.oracle.metadata->smoothness_L);
    inst.export_data = [prob](const std::string& path) { prob.export_train_csv(path); };
    inst.sample_smooth_point = [p](std::mt19937_64& rng) {
      return JointPoint{detail::uniform_vector(rng, p, -1.0, 1.0), detail::signed_magnitude_vector(rng, p, 0.5, 1.5)};
    };
  } else if (name == "hyperclean") {
    HypercleanProblem prob = make_synthetic_hyperclean(
        params.seed, reader.get_count("m_train", 300), reader.get_count("m_val", 100),
        reader.get_count("features", 5), reader.get("corrupt_frac", 0.3),
        reader.get_count("classes", 2), reader.get("separation", 0.8));
    prob.ridge_c = reader.get("ridge_c", 0.001);
    if (!(prob.ridge_c >= 0.0)) throw ConfigError("parameter 'ridge_c' must be >= 0");
    inst.oracle = hyperclean_oracle(prob);
    const double alpha = 1.0 / (2.0 * prob.inner_smoothness());
    const std::size_t m = prob.num_train();
    inst.starts.emplace_back("pretrained",
                             JointPoint{Vector(m, 0.5), hyperclean_pretrained_theta(prob, 0.5, alpha, 200)});
    inst.starts.emplace_back("zero", JointPoint{Vector(m, 0.5), Vector(prob.theta_size(), 0.0)});
    inst.recommended.inner_step_alpha = alpha;
    inst.recommended.outer_step_xi = alpha;
    inst.recommended.separate_outer_steps = OuterSteps{1.0, alpha};
    inst.recommended.momentum_beta = 0.9;
    inst.recommended.max_outer_iters_K = 1000;
    inst.recommended.kkt_eval_every = 10;
    inst.export_data = [prob](const std::string& path) { prob.export_train_csv(path); };
    inst.sample_smooth_point = [m, n = prob.theta_size()](std::mt19937_64& rng) {
      // Keep weights away from the clip kinks at 0 and 1, and logits small
      // enough that no per-sample loss (the v-gradient) falls below the
      // round-off of the summed inner objective.
      return JointPoint{detail::uniform_vector(rng, m, 0.05, 0.95), detail::normal_vector(rng, n, 0.1)};
    };
  }
  return inst;
}

}  // namespace bome::problems
