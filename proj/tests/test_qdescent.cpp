#include <gtest/gtest.h>

#include "riskshare/improve.hpp"
#include "riskshare/infconv.hpp"
#include "riskshare/qdescent.hpp"
#include "support.hpp"

using namespace riskshare;
using support::Rng;

namespace {

const std::vector<double> kUnit{1.0, 1.0};

JointLaw antimonotone() { return validate_joint_law({{{{1.0}, {-1.0}}, 0.5}, {{{0.0}, {2.0}}, 0.5}}); }

BallConfig ball(double r) {
  BallConfig b;
  b.radius = r;
  return b;
}

}  // namespace

TEST(JValue, TwoStateQuadratic) {
  // inf-convolution of two |y|^2/2 is x^2/4: J = 1.5 - (0 + 4/4) / 2 = 1.
  const auto psi = StrictlyConvexProfile::quadratic(1, kUnit);
  EXPECT_NEAR(j_value(psi, antimonotone(), ball(2)), 1.0, 1e-12);
}

TEST(JValue, SharingLawHasZeroJ) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    std::vector<AgentProfile> agents(2);
    for (auto& a : agents) {
      a.eps = support::uniform(rng, 0.5, 2);
      a.pieces = {{{support::uniform(rng, -1, 1)}, 0.0}, {{support::uniform(rng, -1, 1)}, 0.3}};
    }
    const StrictlyConvexProfile psi(1, agents);
    const auto m0 = support::random_measure_1d(rng, 4, -2, 2);
    const auto g0 = sharing_law(psi, m0, ball(2));
    const double j = j_value(psi, g0, ball(2));
    EXPECT_LE(j, 1e-8);
    EXPECT_GE(j, -1e-9);
  }
}

TEST(JValue, NonNegative) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto g0 = support::random_allocation(rng, 2 + t % 2, 1 + t % 2, 3, 2);
    std::vector<AgentProfile> agents(g0.agents());
    for (auto& a : agents) {
      a.eps = support::uniform(rng, 0.5, 2);
      Point slope(g0.dim());
      for (double& v : slope) v = support::uniform(rng, -1, 1);
      a.pieces = {{slope, 0.0}};
    }
    const StrictlyConvexProfile psi(g0.dim(), agents);
    EXPECT_GE(j_value(psi, g0, ball(3)), -1e-9);
  }
}

TEST(MinimizeQ, FirstIterateIsJAtFloors) {
  const auto g0 = antimonotone();
  QDescentConfig cfg;
  cfg.max_iters = 0;
  const auto st = minimize_q(g0, kUnit, ball(2), cfg);
  EXPECT_EQ(st.j, j_value(StrictlyConvexProfile::quadratic(1, kUnit), g0, ball(2)));
  EXPECT_EQ(st.history.size(), 1u);
}

TEST(MinimizeQ, TwoStateStaysAtStatistic) {
  const auto g0 = antimonotone();
  const double stat = efficiency_statistic(g0, kUnit, 1.0, ball(2));
  QDescentConfig cfg;
  cfg.target = stat;
  const auto st = minimize_q(g0, kUnit, ball(2), cfg);
  EXPECT_NEAR(st.j, 1.0, 1e-3);
  EXPECT_GE(st.j, stat - 1e-6);
}

TEST(MinimizeQ, ReachesZeroOnComonotoneFixtures) {
  const std::vector<JointLaw> fixtures{
      validate_joint_law({{{{0.0}, {0.0}}, 0.5}, {{{2.0}, {0.0}}, 0.5}}),
      validate_joint_law({{{{-1.0}, {0.0}}, 0.3}, {{{0.0}, {0.0}}, 0.3}, {{{1.0}, {2.0}}, 0.4}}),
      validate_joint_law({{{{0.0}, {-2.0}}, 0.25}, {{{0.0}, {0.0}}, 0.25}, {{{1.0}, {0.0}}, 0.25},
                          {{{2.0}, {1.0}}, 0.25}}),
  };
  for (std::size_t k = 0; k < fixtures.size(); ++k) {
    const auto& g0 = fixtures[k];
    const BallConfig b = ball(default_grid_parameters(g0).radius);
    const double stat = efficiency_statistic(g0, kUnit, 0.5, b);
    ASSERT_LE(stat, 1e-8) << "fixture " << k;
    const auto st = minimize_q(g0, kUnit, b);
    EXPECT_LE(st.j, 1e-4) << "fixture " << k << " after " << st.iterations << " iterations";
  }
}

TEST(MinimizeQ, MonotoneAndAdmissible) {
  Rng rng(9);
  for (int t = 0; t < 6; ++t) {
    const auto g0 = support::random_allocation(rng, 2, 1, 4, 2);
    const BallConfig b = ball(default_grid_parameters(g0).radius);
    QDescentConfig cfg;
    cfg.max_iters = 60;
    const auto st = minimize_q(g0, kUnit, b, cfg);
    for (std::size_t k = 1; k < st.history.size(); ++k) EXPECT_LE(st.history[k], st.history[k - 1]);
    for (const auto& a : st.profile.all()) {
      EXPECT_GE(a.pieces.size(), 1u);  // max of affine pieces: convex by construction
      EXPECT_GT(a.eps, 0.0);
    }
    EXPECT_NEAR(st.j, j_value(st.profile, g0, b), 1e-9);
  }
}

TEST(MinimizeQ, SandwichAgainstStatistic) {
  Rng rng(21);
  for (int t = 0; t < 6; ++t) {
    const auto g0 = support::random_allocation(rng, 2, 1, 3, 2);
    const BallConfig b = ball(default_grid_parameters(g0).radius);
    const double stat = efficiency_statistic(g0, kUnit, 0.5, b);
    QDescentConfig cfg;
    cfg.target = stat;
    cfg.max_iters = 100;
    const auto st = minimize_q(g0, kUnit, b, cfg);
    EXPECT_GE(st.j, stat - 1e-6) << "instance " << t;
  }
}

TEST(MinimizeQ, DiscrepanciesHaveZeroMass) {
  const auto st = minimize_q(antimonotone(), kUnit, ball(2));
  ASSERT_EQ(st.marginal_discrepancies.size(), 2u);
  for (const auto& d : st.marginal_discrepancies) {
    double mass = 0.0;
    for (const auto& a : d) mass += a.w;
    EXPECT_NEAR(mass, 0.0, 1e-12);
  }
  EXPECT_TRUE(same_law(sum_pushforward(st.gamma_psi), sum_pushforward(antimonotone()), 1e-8));
}

TEST(MinimizeQ, PlanarInstanceDescends) {
  const auto g0 = validate_joint_law({{{{1.0, 0.0}, {0.0, 0.0}}, 0.5}, {{{0.0, 0.0}, {0.0, 1.0}}, 0.5}});
  QDescentConfig cfg;
  cfg.max_iters = 40;
  const auto st = minimize_q(g0, kUnit, ball(1.5), cfg);
  EXPECT_LE(st.j, st.history.front());
  EXPECT_GE(st.j, -1e-9);
}
