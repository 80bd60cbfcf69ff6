#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "riskshare/error.hpp"
#include "riskshare/measures.hpp"
#include "support.hpp"

using namespace riskshare;
using riskshare::support::Rng;

namespace {

Errc error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::SolverFailure;
}

JointLaw two_state() { return validate_joint_law({{{{1.0}, {-1.0}}, 0.5}, {{{0.0}, {2.0}}, 0.5}}); }

}  // namespace

TEST(ValidateMeasure, CanonicalInputIsKept) {
  const auto m = validate_measure({{{0.0}, 0.5}, {{1.0}, 0.5}});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].x[0], 0.0);
  EXPECT_EQ(m[1].x[0], 1.0);
}

TEST(ValidateMeasure, DuplicatesMerge) {
  const auto m = validate_measure({{{0.0}, 0.5}, {{0.0}, 0.5}});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_DOUBLE_EQ(m[0].w, 1.0);
}

TEST(ValidateMeasure, NearDuplicatesWithinMergeDistanceMerge) {
  const auto m = validate_measure({{{0.0, 1.0}, 0.25}, {{5e-13, 1.0}, 0.75}});
  EXPECT_EQ(m.size(), 1u);
  const auto n = validate_measure({{{0.0, 1.0}, 0.25}, {{1e-11, 1.0}, 0.75}});
  EXPECT_EQ(n.size(), 2u);
}

TEST(ValidateMeasure, Errors) {
  EXPECT_EQ(error_of([] { validate_measure({{{0.0}, 0.5}, {{1.0}, 0.4}}); }), Errc::WeightSumOutOfTolerance);
  EXPECT_EQ(error_of([] { validate_measure({{{0.0}, 1.5}, {{1.0}, -0.5}}); }), Errc::NonPositiveWeight);
  EXPECT_EQ(error_of([] { validate_measure({{{0.0}, 0.5}, {{1.0, 2.0}, 0.5}}); }), Errc::DimensionMismatch);
  EXPECT_EQ(error_of([] { validate_measure({}); }), Errc::EmptyInput);
  EXPECT_EQ(error_of([] { validate_measure({{{NAN}, 1.0}}); }), Errc::NonFinite);
  BallConfig b;
  b.radius = 1.0;
  EXPECT_EQ(error_of([&] { validate_measure({{{2.0}, 1.0}}, b); }), Errc::OutsideBall);
}

TEST(ValidateMeasure, SmallDriftIsRenormalized) {
  const auto m = validate_measure({{{0.0}, 0.5}, {{1.0}, 0.5 + 5e-10}});
  EXPECT_NEAR(m[0].w + m[1].w, 1.0, 1e-15);
}

TEST(ValidateMeasure, Idempotent) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto m = support::random_measure_1d(rng, 6, -3, 3);
    std::vector<Atom> again(m.atoms().begin(), m.atoms().end());
    const auto n = validate_measure(again);
    ASSERT_EQ(n.size(), m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
      EXPECT_EQ(n[k].x, m[k].x);
      EXPECT_EQ(n[k].w, m[k].w);
    }
  }
}

TEST(ValidateMeasure, LexicographicOrder) {
  const auto m = validate_measure({{{1.0, 0.0}, 0.25}, {{0.0, 2.0}, 0.25}, {{0.0, -1.0}, 0.5}});
  EXPECT_TRUE(std::is_sorted(m.atoms().begin(), m.atoms().end(),
                             [](const Atom& a, const Atom& b) { return a.x < b.x; }));
}

TEST(Marginal, DegenerateLaw) {
  const auto g = validate_joint_law({{{{3.0}, {4.0}}, 1.0}});
  const auto m = marginal(g, 0);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].x[0], 3.0);
}

TEST(Marginal, CoordinateReadOff) {
  const auto g = validate_joint_law({{{{0.0}, {1.0}}, 0.5}, {{{1.0}, {0.0}}, 0.5}});
  const auto m = marginal(g, 1);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].x[0], 0.0);
  EXPECT_DOUBLE_EQ(m[0].w, 0.5);
  EXPECT_EQ(m[1].x[0], 1.0);
}

TEST(Marginal, ProductLawRecoversFirstFactor) {
  // Product of {(0,.3),(2,.7)} and {(-1,.4),(5,.6)}: four atoms.
  const double a[2] = {0.0, 2.0}, wa[2] = {0.3, 0.7};
  const double b[2] = {-1.0, 5.0}, wb[2] = {0.4, 0.6};
  std::vector<TupleAtom> atoms;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) atoms.push_back({{{a[i]}, {b[j]}}, wa[i] * wb[j]});
  }
  const auto m = marginal(validate_joint_law(atoms), 0);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m[0].w, 0.3, 1e-15);
  EXPECT_NEAR(m[1].w, 0.7, 1e-15);
}

TEST(Marginal, IndexOutOfRange) {
  EXPECT_EQ(error_of([] { marginal(two_state(), 2); }), Errc::IndexOutOfRange);
}

TEST(SumPushforward, Examples) {
  const auto d = sum_pushforward(validate_joint_law({{{{1.0}, {1.0}}, 1.0}}));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].x[0], 2.0);

  const auto c = sum_pushforward(validate_joint_law({{{{0.0}, {1.0}}, 0.5}, {{{1.0}, {0.0}}, 0.5}}));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c[0].w, 1.0);

  const auto m0 = sum_pushforward(two_state());
  ASSERT_EQ(m0.size(), 2u);
  EXPECT_EQ(m0[0].x[0], 0.0);
  EXPECT_EQ(m0[1].x[0], 2.0);
  EXPECT_DOUBLE_EQ(m0[0].w, 0.5);
}

TEST(Properties, MassAndBarycenterConservation) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t p = 1 + t % 3, d = 1 + t % 2;
    const auto g = support::random_allocation(rng, p, d, 1 + t % 5, 3);
    Point total(d, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      const auto m = marginal(g, i);
      double mass = 0.0;
      for (const auto& a : m.atoms()) mass += a.w;
      EXPECT_NEAR(mass, 1.0, 1e-9);
      const Point mu = m.mean();
      for (std::size_t j = 0; j < d; ++j) total[j] += mu[j];
    }
    const Point s = sum_pushforward(g).mean();
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(s[j], total[j], 1e-9);
  }
}

TEST(Properties, PermutationInvariance) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const auto g = support::random_allocation(rng, 2, 2, 5, 2);
    std::vector<TupleAtom> atoms(g.atoms().begin(), g.atoms().end());
    std::shuffle(atoms.begin(), atoms.end(), rng);
    const auto h = validate_joint_law(atoms);
    EXPECT_TRUE(same_law(sum_pushforward(g), sum_pushforward(h), 1e-15));
    for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE(same_law(marginal(g, i), marginal(h, i), 1e-15));
  }
}

TEST(JointLaw, ShapeErrors) {
  EXPECT_EQ(error_of([] { validate_joint_law({{{{0.0}, {1.0}}, 0.5}, {{{0.0}}, 0.5}}); }), Errc::DimensionMismatch);
  EXPECT_EQ(error_of([] { validate_joint_law({{{{0.0}, {1.0, 2.0}}, 1.0}}); }), Errc::DimensionMismatch);
}

TEST(SameLaw, ToleratesLightUnmatchedAtoms) {
  const auto a = validate_measure({{{0.0}, 0.5}, {{1.0}, 0.5}});
  const auto b = validate_measure({{{0.0}, 0.5 - 1e-12}, {{1.0}, 0.5}, {{7.0}, 1e-12}});
  EXPECT_TRUE(same_law(a, b, 1e-9));
  EXPECT_FALSE(same_law(a, validate_measure({{{0.0}, 0.4}, {{1.0}, 0.6}}), 1e-9));
}
