#include <gtest/gtest.h>

#include <cmath>

#include "bome/problems.hpp"
#include "bome/solver_runner.hpp"
#include "test_util.hpp"

using namespace bome;

namespace {

bool same_except_time(const Trace& a, const Trace& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.iter_k != y.iter_k || x.f_value != y.f_value || x.q_hat != y.q_hat || x.lambda_k != y.lambda_k ||
        x.phi_k != y.phi_k || x.delta_norm != y.delta_norm || x.grad_qhat_norm != y.grad_qhat_norm ||
        x.kkt_value != y.kkt_value || x.kkt_proxy_value != y.kkt_proxy_value)
      return false;
  }
  return a.final_point == b.final_point;
}

}  // namespace

TEST(Run, MinimaxBomeConverges) {
  const auto o = problems::minimax_oracle();
  SolverConfig cfg = SolverConfig::with_step(0.05);
  cfg.max_outer_iters_K = 2000;
  const Trace t = run(o, {{1.0}, {1.0}}, cfg);
  EXPECT_EQ(t.termination, Termination::MaxIters);
  EXPECT_EQ(t.records.size(), 2000u);
  EXPECT_LT(std::hypot(t.final_point.v[0], t.final_point.theta[0]), 1e-2);
  ASSERT_TRUE(t.final_kkt);
  EXPECT_LT(t.final_kkt->total, 1e-3);
  // No exact value function here, so the measure is the proxy.
  EXPECT_EQ(t.final_kkt->variant, KktVariant::Proxy);
}

TEST(Run, CoresetOffsetShrinksWithStepSize) {
  // The optimum is a vertex of the hull, reached only as v grows without
  // bound; at a fixed step the iterates settle at a distance of order xi.
  const auto inst = problems::make_problem("coreset");
  const Vector opt = *inst.oracle.metadata->known_theta_opt;
  double prev_dist = 1e300, prev_kkt = 1e300;
  for (double xi : {0.05, 0.02, 0.01}) {
    SolverConfig cfg = SolverConfig::with_step(xi);
    cfg.max_outer_iters_K = static_cast<int>(500.0 / xi);
    cfg.kkt_eval_every = 1000;
    const Trace t = run(inst.oracle, inst.start("start1"), cfg);
    const double d = testutil::dist(t.final_point.theta, opt);
    EXPECT_LT(d, prev_dist) << "xi=" << xi;
    EXPECT_LT(t.final_kkt->total, prev_kkt) << "xi=" << xi;
    EXPECT_LT(d, 4.0 * xi) << "xi=" << xi;
    prev_dist = d;
    prev_kkt = t.final_kkt->total;
  }
}

TEST(Run, SingleIterationMovesAtMostXiDelta) {
  const auto inst = problems::make_problem("coreset");
  SolverConfig cfg = SolverConfig::with_step(0.05);
  cfg.max_outer_iters_K = 1;
  const JointPoint start = inst.start("start2");
  const Trace t = run(inst.oracle, start, cfg);
  ASSERT_EQ(t.records.size(), 1u);
  const double moved = testutil::dist(t.final_point.flat(), start.flat());
  EXPECT_LE(moved, 0.05 * t.records[0].delta_norm * (1 + 1e-12));
}

TEST(Run, RecordsAreIndexedAndMeasuredOnSchedule) {
  const auto o = problems::minimax_oracle();
  SolverConfig cfg = SolverConfig::with_step(0.05);
  cfg.max_outer_iters_K = 25;
  cfg.kkt_eval_every = 10;
  const Trace t = run(o, {{1.0}, {1.0}}, cfg);
  for (std::size_t k = 0; k < t.records.size(); ++k) {
    EXPECT_EQ(t.records[k].iter_k, static_cast<int>(k));
    const bool expect = k % 10 == 0 || k == 24;
    EXPECT_EQ(t.records[k].kkt_value.has_value(), expect) << k;
  }
}

TEST(Run, ExactOraclesAlsoRecordProxy) {
  const auto inst = problems::make_problem("ridge");
  SolverConfig cfg = inst.recommended;
  cfg.max_outer_iters_K = 3;
  const Trace t = run(inst.oracle, inst.default_start(), cfg);
  for (const auto& r : t.records) {
    EXPECT_TRUE(r.kkt_value);
    EXPECT_TRUE(r.kkt_proxy_value);
  }
  EXPECT_EQ(t.final_kkt->variant, KktVariant::Exact);
}

TEST(Run, Deterministic) {
  const auto inst = problems::make_problem("ridge");
  SolverConfig cfg = inst.recommended;
  cfg.max_outer_iters_K = 200;
  const Trace a = run(inst.oracle, inst.default_start(), cfg);
  const Trace b = run(inst.oracle, inst.default_start(), cfg);
  EXPECT_TRUE(same_except_time(a, b));
  const auto inst2 = problems::make_problem("ridge");
  EXPECT_TRUE(same_except_time(a, run(inst2.oracle, inst2.default_start(), cfg)));
}

TEST(Run, StopsOnKktTolerance) {
  const auto o = problems::minimax_oracle();
  SolverConfig cfg = SolverConfig::with_step(0.05);
  cfg.max_outer_iters_K = 5000;
  cfg.stop_kkt_tol = 1e-6;
  const Trace t = run(o, {{1.0}, {1.0}}, cfg);
  EXPECT_EQ(t.termination, Termination::KktTol);
  EXPECT_LT(t.records.size(), 5000u);
  EXPECT_LT(*t.records.back().kkt_value, 1e-6);
}

TEST(Run, NumericalFailureEndsRun) {
  auto o = problems::minimax_oracle();
  o.grad_f = [](const JointPoint& p) {
    if (p.v[0] < 0.95) return JointGradient{{std::nan("")}, {0.0}};
    return JointGradient{{p.theta[0]}, {p.v[0]}};
  };
  SolverConfig cfg = SolverConfig::with_step(0.05);
  cfg.max_outer_iters_K = 100;
  const Trace t = run(o, {{1.0}, {1.0}}, cfg);
  EXPECT_EQ(t.termination, Termination::NumericalError);
  EXPECT_FALSE(t.error_message.empty());
  EXPECT_LT(t.records.size(), 100u);
}

TEST(Run, RejectsBadInputs) {
  const auto o = problems::minimax_oracle();
  EXPECT_THROW(run(o, {{1.0, 2.0}, {1.0}}, SolverConfig{}), ConfigError);
  EXPECT_THROW(run(o, {{std::nan("")}, {1.0}}, SolverConfig{}), ConfigError);
  SolverConfig bad;
  bad.eta = -1.0;
  EXPECT_THROW(run(o, {{1.0}, {1.0}}, bad), ConfigError);
}

TEST(Run, BaselinesThroughRunner) {
  const auto o = problems::minimax_oracle();
  SolverConfig cfg = SolverConfig::with_step(0.05);
  cfg.max_outer_iters_K = 500;
  const Trace gda = run(o, {{1.0}, {1.0}}, cfg, Method::NaiveGDA);
  EXPECT_GT(std::hypot(gda.final_point.v[0], gda.final_point.theta[0]), std::sqrt(2.0));
  for (std::size_t k = 1; k < gda.records.size(); ++k)
    EXPECT_GT(gda.records[k].delta_norm, gda.records[k - 1].delta_norm);
  cfg.max_outer_iters_K = 5000;
  const Trace ogd = run(o, {{1.0}, {1.0}}, cfg, Method::OptimisticGD);
  EXPECT_LT(std::hypot(ogd.final_point.v[0], ogd.final_point.theta[0]), 1e-2);
}

TEST(Run, LlsOffsetStartOscillatesAtLargeStep) {
  // xi = alpha = 0.5 is twice 1/L for the joint problem: the component
  // theta_1 - v flips sign every step instead of shrinking.
  const auto inst = problems::make_problem("lls");
  SolverConfig cfg = inst.recommended;
  cfg.max_outer_iters_K = 200;
  const Trace t = run(inst.oracle, inst.start("offset"), cfg);
  const double gap = t.final_point.theta[0] - t.final_point.v[0];
  EXPECT_GT(std::abs(gap), 1.0);
  EXPECT_NEAR(t.final_point.theta[1], 1.0, 1e-12);
}

TEST(RunningMin, NonIncreasingAndEndsAtFinalPoint) {
  const auto inst = problems::make_problem("ridge");
  SolverConfig cfg = inst.recommended;
  cfg.max_outer_iters_K = 100;
  cfg.kkt_eval_every = 7;
  const Trace t = run(inst.oracle, inst.default_start(), cfg);
  const auto rm = running_min_kkt(t);
  for (std::size_t i = 1; i < rm.size(); ++i) {
    EXPECT_LE(rm[i].second, rm[i - 1].second);
    EXPECT_GT(rm[i].first, rm[i - 1].first);
  }
  EXPECT_EQ(rm.back().first, 100);
}

TEST(RunningMin, SingleEvaluation) {
  Trace t;
  StepDiagnostics d;
  d.kkt_value = 0.5;
  t.records.push_back(d);
  const auto rm = running_min_kkt(t);
  ASSERT_EQ(rm.size(), 1u);
  EXPECT_EQ(rm[0].second, 0.5);
  EXPECT_THROW(running_min_kkt(Trace{}), Error);
}

TEST(RunGrid, ParallelMatchesSequential) {
  const auto inst = problems::make_problem("coreset");
  std::vector<RunJob> jobs;
  for (double eta : {0.1, 0.5, 0.9})
    for (const auto& [name, start] : inst.starts) {
      SolverConfig cfg = inst.recommended;
      cfg.eta = eta;
      cfg.max_outer_iters_K = 300;
      jobs.push_back({&inst.oracle, start, cfg, Method::BOME});
    }
  const auto par = run_grid(jobs, 4);
  ASSERT_EQ(par.size(), jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i)
    EXPECT_TRUE(same_except_time(par[i], run(*jobs[i].oracle, jobs[i].start, jobs[i].config))) << i;
}

TEST(RunGrid, RethrowsConfigErrors) {
  const auto o = problems::minimax_oracle();
  SolverConfig bad;
  bad.outer_step_xi = 0.0;
  EXPECT_THROW(run_grid({{&o, {{1.0}, {1.0}}, bad, Method::BOME}}, 2), ConfigError);
}

TEST(MethodNames, Strings) {
  EXPECT_STREQ(to_string(Method::BOME), "bome");
  EXPECT_STREQ(to_string(Method::NaiveGDA), "gda");
  EXPECT_STREQ(to_string(Method::OptimisticGD), "ogd");
  EXPECT_STREQ(to_string(Termination::KktTol), "kkt_tol");
}
