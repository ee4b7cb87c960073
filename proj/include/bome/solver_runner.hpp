#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bome/baselines.hpp"
#include "bome/bome_step.hpp"
#include "bome/core.hpp"
#include "bome/metrics.hpp"

namespace bome {

enum class Method { BOME, NaiveGDA, OptimisticGD };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::BOME:
      return "bome";
    case Method::NaiveGDA:
      return "gda";
    case Method::OptimisticGD:
      return "ogd";
  }
  return "?";
}

enum class Termination { MaxIters, KktTol, NumericalError };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::MaxIters:
      return "max_iters";
    case Termination::KktTol:
      return "kkt_tol";
    case Termination::NumericalError:
      return "numerical_error";
  }
  return "?";
}

struct Trace {
  std::vector<StepDiagnostics> records;
  SolverConfig config_snapshot;
  std::string problem_name;
  std::optional<ProblemMetadata> metadata;
  Method method = Method::BOME;
  Termination termination = Termination::MaxIters;
  std::string error_message;

  JointPoint start;
  /// Iterate after the last applied update.
  JointPoint final_point;
  /// Measure at final_point (exact when the oracle supports it).
  std::optional<KktReport> final_kkt;
  double final_f = 0.0;

  std::int64_t total_wall_micros() const {
    std::int64_t t = 0;
    for (const auto& r : records) t += r.wall_time_micros;
    return t;
  }
};

/// Exact measure when the oracle has an exact value function, else proxy.
inline KktReport evaluate_kkt(const BilevelOracle& oracle, const JointPoint& point,
                              const SolverConfig& cfg) {
  return oracle.has_exact_value() ? kkt_exact(oracle, point) : kkt_proxy(oracle, point, cfg);
}

/// Drives `method` from `start` for up to cfg.max_outer_iters_K iterations.
/// Record k describes the point before update k. The measure is evaluated
/// every kkt_eval_every iterations, on the last record, and at the final
/// iterate.
inline Trace run(const BilevelOracle& oracle, const JointPoint& start, const SolverConfig& cfg,
                 Method method = Method::BOME) {
  validate_config(cfg, oracle.metadata);
  if (!start.is_valid() || start.dim_v() != oracle.dim_v || start.dim_theta() != oracle.dim_theta)
    throw ConfigError("run: start point is empty, non-finite, or has wrong dimensions for '" +
                      oracle.name + "'");

  using Clock = std::chrono::steady_clock;
  Trace trace;
  trace.config_snapshot = cfg;
  trace.problem_name = oracle.name;
  trace.metadata = oracle.metadata;
  trace.method = method;
  trace.start = start;
  trace.records.reserve(static_cast<std::size_t>(cfg.max_outer_iters_K));

  JointPoint point = start;
  MomentumState momentum;
  JointGradient prev_field;
  const bool exact = oracle.has_exact_value();

  for (int k = 0; k < cfg.max_outer_iters_K; ++k) {
    const auto t0 = Clock::now();
    StepDiagnostics d;
    d.iter_k = k;
    JointPoint next;
    bool stop_tol = false;
    try {
      d.f_value = oracle.eval_f(point);
      switch (method) {
        case Method::BOME: {
          StepResult s = bome_step(oracle, point, cfg, momentum);
          d.q_hat = s.solution.q_hat;
          d.lambda_k = s.solution.lambda;
          d.phi_k = s.solution.phi;
          d.delta_norm = s.solution.delta.norm();
          d.grad_qhat_norm = s.solution.grad_qhat.norm();
          next = std::move(s.next);
          break;
        }
        case Method::NaiveGDA:
          d.delta_norm = minimax_field(oracle, point).norm();
          next = gda_step(oracle, point, cfg.outer_step_xi);
          break;
        case Method::OptimisticGD: {
          auto [p, G] = ogd_step(oracle, point, prev_field, cfg.outer_step_xi);
          d.delta_norm = G.norm();
          next = std::move(p);
          prev_field = std::move(G);
          break;
        }
      }
      if (k % cfg.kkt_eval_every == 0 || k == cfg.max_outer_iters_K - 1) {
        d.kkt_value = evaluate_kkt(oracle, point, cfg).total;
        if (exact) d.kkt_proxy_value = kkt_proxy(oracle, point, cfg).total;
        stop_tol = cfg.stop_kkt_tol && *d.kkt_value < *cfg.stop_kkt_tol;
      }
    } catch (const NumericalError& e) {
      trace.termination = Termination::NumericalError;
      trace.error_message = e.what();
      break;
    }
    d.wall_time_micros =
        std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
    trace.records.push_back(d);

    if (stop_tol) {
      trace.termination = Termination::KktTol;
      break;
    }
    if (!next.is_valid()) {
      trace.termination = Termination::NumericalError;
      trace.error_message = "non-finite iterate after step " + std::to_string(k);
      break;
    }
    point = std::move(next);
  }

  trace.final_point = point;
  try {
    trace.final_f = oracle.eval_f(point);
    trace.final_kkt = evaluate_kkt(oracle, point, cfg);
  } catch (const NumericalError& e) {
    if (trace.termination != Termination::NumericalError) {
      trace.termination = Termination::NumericalError;
      trace.error_message = e.what();
    }
  }
  return trace;
}

/// (k, min_{j <= k} K_j) over every evaluated iteration, ending with the
/// final iterate at k = number of records.
inline std::vector<std::pair<int, double>> running_min_kkt(const Trace& trace) {
  std::vector<std::pair<int, double>> out;
  double best = 0.0;
  auto push = [&](int k, double value) {
    best = out.empty() ? value : std::min(best, value);
    out.emplace_back(k, best);
  };
  for (const auto& r : trace.records)
    if (r.kkt_value) push(r.iter_k, *r.kkt_value);
  if (trace.final_kkt) push(static_cast<int>(trace.records.size()), trace.final_kkt->total);
  if (out.empty()) throw Error("running_min_kkt: trace has no stationarity evaluations");
  return out;
}

struct RunJob {
  const BilevelOracle* oracle = nullptr;
  JointPoint start;
  SolverConfig config;
  Method method = Method::BOME;
};

/// Runs every job, in parallel when threads > 1. Result i belongs to job i.
/// Exceptions other than numerical failures are rethrown after all workers
/// finish.
inline std::vector<Trace> run_grid(const std::vector<RunJob>& jobs, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
  std::vector<Trace> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = run(*jobs[i].oracle, jobs[i].start, jobs[i].config, jobs[i].method);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace bome
