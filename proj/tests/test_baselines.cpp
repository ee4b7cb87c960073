#include <gtest/gtest.h>

#include <cmath>

#include "bome/baselines.hpp"
#include "bome/problems/toy.hpp"

using namespace bome;

namespace {

double joint_norm(const JointPoint& p) { return std::hypot(p.v[0], p.theta[0]); }

}  // namespace

TEST(Gda, OneStep) {
  const auto o = problems::minimax_oracle();
  const JointPoint p = gda_step(o, {{1.0}, {1.0}}, 0.1);
  EXPECT_NEAR(p.v[0], 0.9, 1e-15);
  EXPECT_NEAR(p.theta[0], 1.1, 1e-15);
}

TEST(Gda, OriginIsFixed) {
  const auto o = problems::minimax_oracle();
  EXPECT_EQ(gda_step(o, {{0.0}, {0.0}}, 0.1), (JointPoint{{0.0}, {0.0}}));
}

TEST(Gda, DivergesLikeTheLinearMap) {
  // (v, theta) <- [[1, -xi], [xi, 1]] (v, theta): a rotation scaled by
  // sqrt(1 + xi^2) > 1, so the norm grows by exactly that factor each step.
  const auto o = problems::minimax_oracle();
  const double xi = 0.05;
  JointPoint p{{1.0}, {1.0}};
  double a = 1.0, b = 1.0;
  double prev = joint_norm(p);
  for (int k = 0; k < 500; ++k) {
    p = gda_step(o, p, xi);
    const double na = a - xi * b, nb = b + xi * a;
    a = na;
    b = nb;
    const double n = joint_norm(p);
    EXPECT_GT(n, prev) << "step " << k;
    prev = n;
  }
  EXPECT_NEAR(p.v[0], a, 1e-12);
  EXPECT_NEAR(p.theta[0], b, 1e-12);
  EXPECT_NEAR(prev, std::sqrt(2.0) * std::pow(1.0 + xi * xi, 250.0), 1e-9);
  EXPECT_GT(prev, std::sqrt(2.0));
}

TEST(Ogd, EqualHistoryReducesToGda) {
  const auto o = problems::minimax_oracle();
  const JointPoint p{{0.3}, {-0.7}};
  const JointGradient G = minimax_field(o, p);
  const auto [next, stored] = ogd_step(o, p, G, 0.1);
  const JointPoint gda = gda_step(o, p, 0.1);
  // w - 2 xi G + xi G equals w - xi G up to rounding.
  EXPECT_NEAR(next.v[0], gda.v[0], 1e-15);
  EXPECT_NEAR(next.theta[0], gda.theta[0], 1e-15);
  EXPECT_EQ(stored, G);
  // An empty history is treated the same way.
  const JointPoint first = ogd_step(o, p, {}, 0.1).first;
  EXPECT_NEAR(first.v[0], gda.v[0], 1e-15);
  EXPECT_NEAR(first.theta[0], gda.theta[0], 1e-15);
}

TEST(Ogd, OriginWithZeroHistoryIsFixed) {
  const auto o = problems::minimax_oracle();
  const auto [next, stored] = ogd_step(o, {{0.0}, {0.0}}, JointGradient::zeros(1, 1), 0.1);
  EXPECT_EQ(next, (JointPoint{{0.0}, {0.0}}));
}

namespace {

// The exact linear recursion z_{k+1} = z_k - 2 xi A z_k + xi A z_{k-1} with
// A z = (theta, -v) and z_{-1} = z_0.
std::pair<double, double> ogd_linear(double v, double th, double xi, int steps) {
  double pv = v, pt = th;
  for (int k = 0; k < steps; ++k) {
    const double nv = v - 2.0 * xi * th + xi * pt;
    const double nt = th + 2.0 * xi * v - xi * pv;
    pv = v;
    pt = th;
    v = nv;
    th = nt;
  }
  return {v, th};
}

JointPoint run_ogd(int steps, double xi) {
  const auto o = problems::minimax_oracle();
  JointPoint p{{1.0}, {1.0}};
  JointGradient prev;
  for (int k = 0; k < steps; ++k) {
    auto [n, G] = ogd_step(o, p, prev, xi);
    p = std::move(n);
    prev = std::move(G);
  }
  return p;
}

}  // namespace

TEST(Ogd, MatchesLinearRecursion) {
  const JointPoint p = run_ogd(2000, 0.05);
  const auto [v, th] = ogd_linear(1.0, 1.0, 0.05, 2000);
  EXPECT_NEAR(p.v[0], v, 1e-13);
  EXPECT_NEAR(p.theta[0], th, 1e-13);
  // The contraction factor per step at xi = 0.05 is about 0.99875, so the
  // iterate is still about 0.115 from the origin here.
  EXPECT_LT(joint_norm(p), 0.12);
  EXPECT_GT(joint_norm(p), 0.11);
}

TEST(Ogd, ConvergesToOrigin) {
  EXPECT_LT(joint_norm(run_ogd(5000, 0.05)), 1e-2);
  EXPECT_LT(joint_norm(run_ogd(20000, 0.05)), 1e-10);
}
