#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "bome/bome_step.hpp"
#include "bome/problems/ridge.hpp"
#include "bome/problems/toy.hpp"
#include "test_util.hpp"

using namespace bome;

// --- q_hat_value -----------------------------------------------------------

TEST(QHat, ZeroWhenThetaEqualsThetaT) {
  const auto o = problems::coreset_oracle({});
  EXPECT_EQ(q_hat_value(o, {0.1, 0.2, 0.3, 0.4}, {1.0, 2.0}, {1.0, 2.0}), 0.0);
}

TEST(QHat, QuadraticOneStep) {
  const Vector c{0.5, -1.0};
  const auto o = testutil::quadratic_inner(c);
  const Vector theta{c[0] + 1.0, c[1]};
  const InnerResult r = inner_descent(o, {0.0}, theta, 1, 0.25);
  EXPECT_DOUBLE_EQ(q_hat_value(o, {0.0}, theta, r.theta_T), 0.75);
}

TEST(QHat, CoresetMatchesScalarRecursion) {
  const auto o = problems::coreset_oracle({});
  const Vector v(4, 0.0);
  const Vector theta{0.0, 3.0};
  const InnerResult r = inner_descent(o, v, theta, 10, 0.05);

  // Independent: at v = 0 the center is the vertex mean (-0.25, 2); each
  // coordinate follows t <- t - 0.05 * 2 (t - c).
  const double cx = (1.0 + 3.0 - 2.0 - 3.0) / 4.0, cy = (3.0 + 1.0 + 2.0 + 2.0) / 4.0;
  double tx = 0.0, ty = 3.0;
  for (int t = 0; t < 10; ++t) {
    tx -= 0.05 * 2.0 * (tx - cx);
    ty -= 0.05 * 2.0 * (ty - cy);
  }
  const double g0 = (0.0 - cx) * (0.0 - cx) + (3.0 - cy) * (3.0 - cy);
  const double gT = (tx - cx) * (tx - cx) + (ty - cy) * (ty - cy);
  EXPECT_NEAR(q_hat_value(o, v, theta, r.theta_T), g0 - gT, 1e-14);
}

// --- grad_q_hat ------------------------------------------------------------

TEST(GradQHat, VIndependentInner) {
  const auto o = testutil::quadratic_inner({1.0, 2.0}, 3);
  const Vector v{0.3, 0.1, -0.2}, th{0.0, 0.0};
  const JointGradient g = grad_q_hat(o, v, th, {0.5, 1.0});
  EXPECT_EQ(g.dv, Vector(3, 0.0));
  EXPECT_EQ(g.dtheta, o.grad_g({v, th}).dtheta);
}

TEST(GradQHat, ThetaEqualsThetaT) {
  const auto o = problems::coreset_oracle({});
  const Vector v{0.3, -0.1, 0.2, 0.0}, th{1.0, 1.0};
  const JointGradient g = grad_q_hat(o, v, th, th);
  EXPECT_EQ(g.dv, Vector(4, 0.0));
  EXPECT_EQ(g.dtheta, o.grad_g({v, th}).dtheta);
}

TEST(GradQHat, StopGradientMatchesFiniteDifferenceWithFrozenThetaT) {
  const auto o = problems::coreset_oracle({});
  const Vector v{0.3, -0.1, 0.2, 0.0}, th{1.0, 0.5};
  const Vector thT = inner_descent(o, v, th, 3, 0.05).theta_T;
  const JointGradient g = grad_q_hat(o, v, th, thT);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 4; ++i) {
    Vector vp = v, vm = v;
    vp[i] += h;
    vm[i] -= h;
    const double fd = (q_hat_value(o, vp, th, thT) - q_hat_value(o, vm, th, thT)) / (2 * h);
    EXPECT_NEAR(g.dv[i], fd, 1e-7);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    Vector tp = th, tm = th;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (q_hat_value(o, v, tp, thT) - q_hat_value(o, v, tm, thT)) / (2 * h);
    EXPECT_NEAR(g.dtheta[i], fd, 1e-7);
  }
}

TEST(GradQHat, RidgeErrorShrinksGeometricallyInT) {
  const auto prob = problems::make_synthetic_ridge(5);
  const auto o = problems::ridge_oracle(prob);
  const double alpha = 1.0 / (2.0 * *o.metadata->smoothness_L);
  const Vector v{0.2, -0.3, 0.1, 0.4, -0.1};
  const Vector th{1.0, -2.0, 0.5, 3.0, -1.0};
  const Vector opt = problems::ridge_inner_opt(prob, v);
  const JointGradient exact = grad_q_hat(o, v, th, opt);
  auto grad_error = [&](int T) {
    JointGradient diff = grad_q_hat(o, v, th, inner_descent(o, v, th, T, alpha).theta_T);
    diff.add_scaled(-1.0, exact);
    return diff.norm();
  };
  // The inner iterate contracts monotonically; the gradient error follows it
  // at every single point only up to a constant, so it is checked end to end.
  double prev = 1e300;
  for (int T : {1, 2, 4, 8, 16}) {
    const double e = testutil::dist(inner_descent(o, v, th, T, alpha).theta_T, opt);
    EXPECT_LT(e, 0.9 * prev) << "T=" << T;
    prev = e;
  }
  EXPECT_LT(grad_error(16), 0.1 * grad_error(1));
  EXPECT_LT(grad_error(200), 1e-8);
}

// --- compute_phi -----------------------------------------------------------

TEST(ComputePhi, Examples) {
  EXPECT_DOUBLE_EQ(compute_phi(BarrierKind::GradNormSq, 0.5, 123.0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(compute_phi(BarrierKind::Value, 0.5, 0.75, 99.0), 0.375);
  EXPECT_EQ(compute_phi(BarrierKind::Value, 0.5, -1e-12, 1.0), 0.0);
}

// --- compute_lambda --------------------------------------------------------

TEST(ComputeLambda, AlignedGradientsNeedNoCorrection) {
  const JointGradient u{{1.0, 2.0}, {-0.5}};
  EXPECT_EQ(compute_lambda(u, u, 0.5 * u.squared_norm()), 0.0);
}

TEST(ComputeLambda, OpposedGradients) {
  const JointGradient q{{0.6}, {0.8}};
  const JointGradient f{{-0.6}, {-0.8}};
  EXPECT_NEAR(compute_lambda(f, q, 0.5), 1.5, 1e-15);
}

TEST(ComputeLambda, ZeroConstraintGradient) {
  const JointGradient q{{0.0}, {0.0}};
  const JointGradient f{{1.0}, {1.0}};
  EXPECT_EQ(compute_lambda(f, q, 3.0), 0.0);
}

TEST(ComputeLambda, MatchesBruteForceDualSearch) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const JointGradient gf = testutil::random_gradient(rng, 5, 5);
    const JointGradient gq = testutil::random_gradient(rng, 5, 5);
    const double phi = u(rng);
    EXPECT_NEAR(compute_lambda(gf, gq, phi), testutil::brute_force_lambda(gf, gq, phi), 1e-6) << "instance " << i;
  }
}

// --- solve_barrier invariants ----------------------------------------------

TEST(SolveBarrier, InvariantsOnRandomInstances) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    JointGradient gf = testutil::random_gradient(rng, 4, 3);
    JointGradient gq = testutil::random_gradient(rng, 4, 3, i % 5 == 0 ? 1e-3 : 1.0);
    const BarrierKind kind = i % 2 ? BarrierKind::Value : BarrierKind::GradNormSq;
    const double q = u(rng) - 0.2;
    const BarrierSolution s = solve_barrier(gf, gq, q, kind, u(rng));
    const auto bad = barrier_invariant_violations(s);
    EXPECT_TRUE(bad.empty()) << "instance " << i << ": " << (bad.empty() ? "" : bad.front());
    EXPECT_GE(s.lambda, 0.0);
    EXPECT_GE(s.phi, 0.0);
  }
}

TEST(SolveBarrier, InactiveDeltaIsGradFBitExact) {
  const JointGradient gf{{1.0, 2.0}, {3.0}};
  const JointGradient gq{{0.1, 0.1}, {0.1}};
  const BarrierSolution s = solve_barrier(gf, gq, 0.0, BarrierKind::Value, 0.5);
  ASSERT_EQ(s.lambda, 0.0);
  EXPECT_EQ(s.delta, gf);
}

TEST(SolveBarrier, InvariantCheckerFlagsBrokenSolution) {
  BarrierSolution s = solve_barrier({{-1.0}, {0.0}}, {{1.0}, {0.0}}, 1.0, BarrierKind::GradNormSq, 0.5);
  ASSERT_GT(s.lambda, 0.0);
  s.delta = s.grad_f;
  EXPECT_FALSE(barrier_invariant_violations(s).empty());
  s.lambda = -1.0;
  EXPECT_FALSE(barrier_invariant_violations(s).empty());
}

// --- bome_step -------------------------------------------------------------

TEST(BomeStep, StationaryPointUnchanged) {
  BilevelOracle o;
  o.name = "flat";
  o.dim_v = 2;
  o.dim_theta = 1;
  o.eval_f = [](const JointPoint&) { return 1.0; };
  o.grad_f = [](const JointPoint&) { return JointGradient::zeros(2, 1); };
  o.eval_g = [](const JointPoint&) { return 0.0; };
  o.grad_g = [](const JointPoint&) { return JointGradient::zeros(2, 1); };
  const JointPoint p{{0.3, -0.2}, {1.5}};
  MomentumState m;
  const StepResult r = bome_step(o, p, SolverConfig{}, m);
  EXPECT_EQ(r.next, p);
  EXPECT_EQ(r.solution.lambda, 0.0);
}

namespace {

// Independent transcript of one outer step on the bilinear problem
// f = v theta, g = -v theta, with scalar arithmetic only.
std::array<double, 2> minimax_transcript(double v, double th, double xi, double alpha, int T, double eta) {
  double thT = th;
  for (int t = 0; t < T; ++t) thT += alpha * v;  // d/dtheta(-v theta) = -v
  const double qv = -th + thT;                   // d/dv g(v,th) - d/dv g(v,thT)
  const double qt = -v;
  const double fv = th, ft = v;
  const double nsq = qv * qv + qt * qt;
  const double phi = eta * nsq;
  const double lam = std::max((phi - (fv * qv + ft * qt)) / nsq, 0.0);
  return {v - xi * (fv + lam * qv), th - xi * (ft + lam * qt)};
}

}  // namespace

TEST(BomeStep, MinimaxFirstStepMatchesTranscript) {
  const auto o = problems::minimax_oracle();
  MomentumState m;
  const StepResult r = bome_step(o, {{1.0}, {1.0}}, SolverConfig::with_step(0.05), m);
  const auto ref = minimax_transcript(1.0, 1.0, 0.05, 0.05, 10, 0.5);
  EXPECT_NEAR(r.next.v[0], ref[0], 1e-15);
  EXPECT_NEAR(r.next.theta[0], ref[1], 1e-15);
  // Hand values: theta_T = 1.5, q-hat = 0.5, lambda = 0.9, delta = (1.45, 0.1).
  EXPECT_NEAR(r.solution.q_hat, 0.5, 1e-15);
  EXPECT_NEAR(r.solution.lambda, 0.9, 1e-15);
  EXPECT_NEAR(r.next.v[0], 0.9275, 1e-15);
  EXPECT_NEAR(r.next.theta[0], 0.995, 1e-15);
}

TEST(BomeStep, MinimaxTranscriptOverManySteps) {
  const auto o = problems::minimax_oracle();
  SolverConfig cfg = SolverConfig::with_step(0.05);
  MomentumState m;
  JointPoint p{{1.0}, {1.0}};
  std::array<double, 2> ref{1.0, 1.0};
  for (int k = 0; k < 50; ++k) {
    p = bome_step(o, p, cfg, m).next;
    ref = minimax_transcript(ref[0], ref[1], 0.05, 0.05, 10, 0.5);
  }
  EXPECT_NEAR(p.v[0], ref[0], 1e-13);
  EXPECT_NEAR(p.theta[0], ref[1], 1e-13);
}

TEST(BomeStep, CoresetFirstStepDiagnosticsMatchTranscript) {
  const auto o = problems::coreset_oracle({});
  MomentumState m;
  const StepResult r = bome_step(o, {Vector(4, 0.0), {0.0, 3.0}}, SolverConfig::with_step(0.05), m);

  // Independent transcript. X columns are the vertices; at v = 0 the softmax
  // is uniform and its Jacobian is (I - 11^T/4)/4.
  const double X[2][4] = {{1, 3, -2, -3}, {3, 1, 2, 2}};
  const double s = 0.25;
  const double c[2] = {-0.25, 2.0};
  double th[2] = {0.0, 3.0}, thT[2] = {0.0, 3.0};
  for (int t = 0; t < 10; ++t)
    for (int d = 0; d < 2; ++d) thT[d] -= 0.05 * 2.0 * (thT[d] - c[d]);
  auto g = [&](const double* t) { return (t[0] - c[0]) * (t[0] - c[0]) + (t[1] - c[1]) * (t[1] - c[1]); };
  const double qhat = g(th) - g(thT);
  // d/dv_i ||t - X s||^2 = -2 sum_j J_ji (X^T (t - Xs))_j, J = s(I - s 1^T) at uniform s.
  auto grad_v = [&](const double* t) {
    std::array<double, 4> u{}, out{};
    for (int j = 0; j < 4; ++j) u[j] = X[0][j] * (t[0] - c[0]) + X[1][j] * (t[1] - c[1]);
    const double mean_u = (u[0] + u[1] + u[2] + u[3]) / 4.0;
    for (int i = 0; i < 4; ++i) out[i] = -2.0 * s * (u[i] - mean_u);
    return out;
  };
  const auto a = grad_v(th), b = grad_v(thT);
  double gq[6], gf[6] = {0, 0, 0, 0, 2.0 * (0.0 - 3.0), 2.0 * (3.0 + 2.0)};
  for (int i = 0; i < 4; ++i) gq[i] = a[i] - b[i];
  gq[4] = 2.0 * (th[0] - c[0]);
  gq[5] = 2.0 * (th[1] - c[1]);
  double nsq = 0, fq = 0;
  for (int i = 0; i < 6; ++i) {
    nsq += gq[i] * gq[i];
    fq += gf[i] * gq[i];
  }
  const double lam = std::max((0.5 * nsq - fq) / nsq, 0.0);
  double dn = 0;
  for (int i = 0; i < 6; ++i) dn += (gf[i] + lam * gq[i]) * (gf[i] + lam * gq[i]);

  EXPECT_NEAR(r.solution.q_hat, qhat, 1e-13);
  EXPECT_NEAR(r.solution.lambda, lam, 1e-12);
  EXPECT_NEAR(r.solution.delta.norm(), std::sqrt(dn), 1e-12);
  EXPECT_TRUE(barrier_invariant_violations(r.solution).empty());
}

TEST(BomeStep, SeparateOuterSteps) {
  const auto o = problems::minimax_oracle();
  SolverConfig cfg = SolverConfig::with_step(0.05);
  MomentumState m1, m2;
  const StepResult base = bome_step(o, {{1.0}, {1.0}}, cfg, m1);
  cfg.separate_outer_steps = OuterSteps{0.1, 0.02};
  const StepResult sep = bome_step(o, {{1.0}, {1.0}}, cfg, m2);
  EXPECT_NEAR(sep.next.v[0], 1.0 - 0.1 * base.solution.delta.dv[0], 1e-15);
  EXPECT_NEAR(sep.next.theta[0], 1.0 - 0.02 * base.solution.delta.dtheta[0], 1e-15);
}

TEST(BomeStep, HeavyBallMomentum) {
  const auto o = problems::minimax_oracle();
  SolverConfig cfg = SolverConfig::with_step(0.05);
  cfg.momentum_beta = 0.9;
  MomentumState m;
  MomentumState none;
  const JointPoint p0{{1.0}, {1.0}};
  const StepResult s0 = bome_step(o, p0, cfg, m);
  EXPECT_EQ(m.buffer, s0.solution.delta);
  const StepResult s1 = bome_step(o, s0.next, cfg, m);
  JointGradient expect = s0.solution.delta;
  for (auto& x : expect.dv) x *= 0.9;
  for (auto& x : expect.dtheta) x *= 0.9;
  expect.add_scaled(1.0, s1.solution.delta);
  EXPECT_NEAR(s1.next.v[0], s0.next.v[0] - 0.05 * expect.dv[0], 1e-15);
  EXPECT_NEAR(s1.next.theta[0], s0.next.theta[0] - 0.05 * expect.dtheta[0], 1e-15);

  // beta = 0 leaves the buffer untouched.
  bome_step(o, p0, SolverConfig::with_step(0.05), none);
  EXPECT_FALSE(none.initialized);
  m.reset();
  EXPECT_FALSE(m.initialized);
}

TEST(BomeStep, NonFiniteDirectionIsNumericalError) {
  auto o = problems::minimax_oracle();
  o.grad_f = [](const JointPoint&) { return JointGradient{{std::nan("")}, {0.0}}; };
  MomentumState m;
  EXPECT_THROW(bome_step(o, {{1.0}, {1.0}}, SolverConfig{}, m), NumericalError);
}
