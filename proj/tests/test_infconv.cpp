#include <gtest/gtest.h>

#include <cmath>

#include "riskshare/error.hpp"
#include "riskshare/infconv.hpp"
#include "support.hpp"

using namespace riskshare;
using support::Rng;

namespace {

BallConfig ball(double r, std::size_t dim = 0) {
  BallConfig b;
  b.radius = r;
  if (dim > 0) b.center.assign(dim, 0.0);
  return b;
}

StrictlyConvexProfile quad(std::size_t dim, std::vector<double> eps) {
  return StrictlyConvexProfile::quadratic(dim, eps);
}

StrictlyConvexProfile spd_profile(const std::vector<Eigen::MatrixXd>& s) {
  std::vector<AgentProfile> agents;
  for (const auto& si : s) {
    AgentProfile a;
    a.floor_matrix = si.inverse();
    agents.push_back(a);
  }
  return StrictlyConvexProfile(static_cast<std::size_t>(s[0].rows()), agents);
}

StrictlyConvexProfile random_piecewise(Rng& rng, std::size_t agents, std::size_t pieces) {
  std::vector<AgentProfile> out;
  for (std::size_t i = 0; i < agents; ++i) {
    AgentProfile a;
    a.eps = support::uniform(rng, 0.3, 2.0);
    for (std::size_t k = 0; k < pieces; ++k) {
      a.pieces.push_back({{support::uniform(rng, -2, 2)}, support::uniform(rng, -1, 1)});
    }
    out.push_back(a);
  }
  return StrictlyConvexProfile(1, out);
}

// Subdifferential of the max-affine part at y (1D): [min, max] of active slopes.
std::pair<double, double> active_slopes(const AgentProfile& a, double y) {
  double best = -1e300;
  for (const auto& pc : a.pieces) best = std::max(best, pc.slope[0] * y + pc.intercept);
  double lo = 1e300, hi = -1e300;
  for (const auto& pc : a.pieces) {
    if (pc.slope[0] * y + pc.intercept >= best - 1e-9) {
      lo = std::min(lo, pc.slope[0]);
      hi = std::max(hi, pc.slope[0]);
    }
  }
  return {lo, hi};
}

Eigen::Matrix2d family_s1(int n) {
  const double r = std::sqrt(static_cast<double>(n));
  Eigen::Matrix2d s;
  s << 0.5, 1.0 / (8.0 * r), 1.0 / (8.0 * r), 0.5 / n;
  return s;
}

Eigen::Matrix2d family_s2(int n) {
  Eigen::Matrix2d s = family_s1(n);
  s(0, 1) = s(1, 0) = -s(0, 1);
  return s;
}

}  // namespace

TEST(SharePoint, SymmetricQuadratics) {
  const auto sp = share_point(quad(2, {1, 1}), {2.0, 0.0}, ball(100));
  ASSERT_EQ(sp.shares.size(), 2u);
  for (const auto& y : sp.shares) {
    EXPECT_NEAR(y[0], 1.0, 1e-12);
    EXPECT_NEAR(y[1], 0.0, 1e-12);
  }
  EXPECT_NEAR(sp.price[0], 1.0, 1e-12);
  EXPECT_NEAR(sp.price[1], 0.0, 1e-12);
}

TEST(SharePoint, IterativeMatchesClosedForm) {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    std::vector<Eigen::MatrixXd> s{support::random_spd(rng, 2, 0.5, 2), support::random_spd(rng, 2, 0.5, 2)};
    const auto t_mats = quadratic_sharing_matrix(s);
    const Eigen::Vector2d x(support::uniform(rng, -1, 1), support::uniform(rng, -1, 1));
    ShareOptions opt;
    opt.allow_closed_form = false;
    const auto sp = share_point(spd_profile(s), {x[0], x[1]}, ball(100), opt);
    EXPECT_FALSE(sp.closed_form);
    for (std::size_t i = 0; i < 2; ++i) {
      const Eigen::Vector2d expect = t_mats[i] * x;
      EXPECT_NEAR(sp.shares[i][0], expect[0], 1e-8);
      EXPECT_NEAR(sp.shares[i][1], expect[1], 1e-8);
    }
  }
}

TEST(SharePoint, ZeroAggregate) {
  const auto sp = share_point(quad(1, {1, 1, 1}), {0.0}, ball(1));
  for (const auto& y : sp.shares) EXPECT_EQ(y[0], 0.0);
}

TEST(SharePoint, OutsideDomain) {
  try {
    (void)share_point(quad(1, {1, 1}), {2.5}, ball(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::XOutsideDomain);
  }
}

TEST(SharePoint, BallConstraintAndSlackness) {
  // Agent 1 is much cheaper; unconstrained it would take 9/10 of x = 1.8.
  const auto psi = quad(1, {0.1, 0.9});
  const auto sp = share_point(psi, {1.8}, ball(1));
  EXPECT_NEAR(sp.shares[0][0], 1.0, 1e-9);
  EXPECT_NEAR(sp.shares[1][0], 0.8, 1e-9);
  EXPECT_GT(sp.multipliers[0], 0.0);
  EXPECT_EQ(sp.multipliers[1], 0.0);
  EXPECT_LE(sp.residual, 1e-8 * (1 + 1.8));
}

TEST(SharePoint, RandomPiecewiseKkt) {
  Rng rng(77);
  for (int t = 0; t < 40; ++t) {
    const auto psi = random_piecewise(rng, 2 + t % 2, 1 + t % 4);
    const BallConfig b = ball(3);
    const double x = support::uniform(rng, -4, 4);
    const auto sp = share_point(psi, {x}, b);
    double sum = 0.0;
    for (const auto& y : sp.shares) sum += y[0];
    EXPECT_LE(std::abs(sum - x), 1e-8 * (1 + std::abs(x)));
    for (std::size_t i = 0; i < psi.agents(); ++i) {
      const double y = sp.shares[i][0];
      EXPECT_LE(std::abs(y), 3.0 + 1e-9);
      if (3.0 - std::abs(y) > 1e-10) EXPECT_EQ(sp.multipliers[i], 0.0);
      // price - eps*y - multiplier*y must be a subgradient of the max-affine part.
      const double g = sp.price[0] - psi.agent(i).eps * y - sp.multipliers[i] * y;
      const auto [lo, hi] = active_slopes(psi.agent(i), y);
      EXPECT_GE(g, lo - 1e-6) << "instance " << t;
      EXPECT_LE(g, hi + 1e-6) << "instance " << t;
    }
  }
}

TEST(SharePoint, UniqueFromDifferentStarts) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto psi = random_piecewise(rng, 2, 3);
    const double x = support::uniform(rng, -3, 3);
    ShareOptions a, b;
    a.initial_price = Point{-5.0};
    b.initial_price = Point{5.0};
    const auto sa = share_point(psi, {x}, ball(2), a);
    const auto sb = share_point(psi, {x}, ball(2), b);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(sa.shares[i][0], sb.shares[i][0], 1e-7);
  }
}

TEST(SharePoint, MonotoneInOneDimension) {
  Rng rng(19);
  for (int t = 0; t < 10; ++t) {
    const auto psi = random_piecewise(rng, 3, 3);
    std::vector<double> prev;
    for (int k = -20; k <= 20; ++k) {
      const auto sp = share_point(psi, {0.2 * k}, ball(50));
      std::vector<double> cur;
      for (const auto& y : sp.shares) cur.push_back(y[0]);
      if (!prev.empty()) {
        for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_LE(prev[i], cur[i] + 1e-8);
      }
      prev = cur;
    }
  }
}

TEST(InfConvolution, Values) {
  const auto psi = quad(1, {1, 1});
  for (double x : {-1.5, 0.0, 0.7, 2.0}) EXPECT_NEAR(inf_convolution_value(psi, {x}, ball(10)), x * x / 4, 1e-12);
  EXPECT_EQ(inf_convolution_value(psi, {0.0}, ball(10)), 0.0);

  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const auto pw = random_piecewise(rng, 2, 3);
    const double y1 = support::uniform(rng, -1, 1), y2 = support::uniform(rng, -1, 1);
    const double direct = pw.value(0, Point{y1}) + pw.value(1, Point{y2});
    EXPECT_LE(inf_convolution_value(pw, {y1 + y2}, ball(1)), direct + 1e-9);
  }
}

TEST(SharingLaw, Examples) {
  const auto psi = quad(1, {1, 1});
  const auto single = sharing_law(psi, validate_measure({{{1.0}, 1.0}}), ball(5));
  ASSERT_EQ(single.size(), 1u);
  EXPECT_NEAR(single[0].x[0][0], 0.5, 1e-12);

  const auto m0 = validate_measure({{{0.0}, 0.5}, {{2.0}, 0.5}});
  const auto law = sharing_law(psi, m0, ball(2));
  ASSERT_EQ(law.size(), 2u);
  EXPECT_NEAR(law[0].x[0][0], 0.0, 1e-12);
  EXPECT_NEAR(law[1].x[0][0], 1.0, 1e-12);
  EXPECT_NEAR(law[1].x[1][0], 1.0, 1e-12);
  EXPECT_TRUE(same_law(sum_pushforward(law), m0, 1e-8));

  Rng rng(6);
  const auto pw = random_piecewise(rng, 3, 2);
  const auto m = support::random_measure_1d(rng, 5, -3, 3);
  EXPECT_TRUE(same_law(sum_pushforward(sharing_law(pw, m, ball(1.5))), m, 1e-8));
}

TEST(QuadraticSharingMatrix, UnboundedFamily) {
  double previous = 0.0;
  for (int n : {1, 4, 16, 64}) {
    const std::vector<Eigen::MatrixXd> s{family_s1(n), family_s2(n)};
    const auto t = quadratic_sharing_matrix(s);
    const double r = std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(t[0](0, 0), 0.5, 1e-12);
    EXPECT_NEAR(t[0](0, 1), r / 8.0, 1e-12);
    EXPECT_NEAR(t[0](1, 0), 1.0 / (8.0 * r), 1e-12);
    EXPECT_NEAR(t[0](1, 1), 0.5, 1e-12);
    const double norm = Eigen::JacobiSVD<Eigen::MatrixXd>(t[0]).singularValues()[0];
    EXPECT_GT(norm, previous);
    previous = norm;
  }
}

TEST(QuadraticSharingMatrix, EqualInputsSplitEvenly) {
  Rng rng(1);
  const auto s = support::random_spd(rng, 3, 0.5, 3);
  const auto t = quadratic_sharing_matrix(std::vector<Eigen::MatrixXd>{s, s, s});
  for (const auto& ti : t) EXPECT_TRUE(ti.isApprox(Eigen::MatrixXd::Identity(3, 3) / 3.0, 1e-12));
}

TEST(QuadraticSharingMatrix, SumsToIdentity) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    std::vector<Eigen::MatrixXd> s;
    for (int i = 0; i < 2 + k % 3; ++i) s.push_back(support::random_spd(rng, 1 + k % 3, 0.1, 5));
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(s[0].rows(), s[0].rows());
    for (const auto& ti : quadratic_sharing_matrix(s)) sum += ti;
    EXPECT_LE((sum - Eigen::MatrixXd::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(QuadraticSharingMatrix, Errors) {
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 0, 0, -1;
  try {
    (void)quadratic_sharing_matrix(std::vector<Eigen::MatrixXd>{bad, Eigen::MatrixXd::Identity(2, 2)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotPositiveDefinite);
  }
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW((void)quadratic_sharing_matrix(std::vector<Eigen::MatrixXd>{asym, asym}), Error);
}

TEST(Counterexample, FamilyFour) {
  const auto d = counterexample_family(4, 0.5);
  Eigen::Matrix2d expect;
  expect << 0.5, 0.25, 0.0625, 0.5;
  EXPECT_LE((d.t1 - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Counterexample, NEqualsOneIsConvexCase) {
  for (double eps : {0.1, 0.5, 0.9}) {
    const auto d = counterexample_family(1, eps);
    EXPECT_LE((d.m1 - d.m1_prime).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(d.m1.determinant(), eps / 4, 1e-12);
    EXPECT_NEAR(d.det_m1_sum, eps, 1e-12);
  }
}

TEST(Counterexample, NegativeDeterminant) {
  const int n = 100;
  const double eps = 0.01;
  // Entries of M1 + M1' in closed form.
  const double off_upper = std::sqrt(1 - eps) / 2 + std::sqrt(n - eps) / (2.0 * n);
  const double off_lower = std::sqrt(1 - eps) / 2 + std::sqrt(n - eps) / 2;
  const double oracle = 1.0 - off_upper * off_lower;
  const auto d = counterexample_family(n, eps);
  EXPECT_NEAR(d.det_m1_sum, oracle, 1e-12);
  EXPECT_NEAR(d.det_m1_sum, -2.0097, 1e-4);
  EXPECT_LT(d.det_m1_sum, 0.0);
  EXPECT_GT(d.m1.determinant(), 0.0);
  EXPECT_GT(d.m1_prime.determinant(), 0.0);
}

TEST(Counterexample, ParameterChecks) {
  EXPECT_THROW((void)counterexample_family(0, 0.5), Error);
  EXPECT_THROW((void)counterexample_family(3, 0.0), Error);
  EXPECT_THROW((void)counterexample_family(3, 1.0), Error);
}

TEST(Profile, Structure) {
  std::vector<AgentProfile> agents(2);
  agents[0].pieces = {{{1.0}, 0.0}, {{1.0}, 0.0}, {{-1.0}, 0.0}};
  const StrictlyConvexProfile psi(1, agents);
  EXPECT_EQ(psi.agent(0).pieces.size(), 2u);  // duplicate removed
  EXPECT_EQ(psi.agent(1).pieces.size(), 1u);  // zero piece added
  EXPECT_TRUE(psi.pure_quadratic(1));
  EXPECT_FALSE(psi.pure_quadratic(0));
  EXPECT_DOUBLE_EQ(psi.value(0, Point{-2.0}), 2.0 + 2.0);
  EXPECT_DOUBLE_EQ(psi.modulus(0, 2.0), 2.0);

  std::vector<AgentProfile> bad(1);
  bad[0].eps = 0.0;
  EXPECT_THROW(StrictlyConvexProfile(1, bad), Error);
}
