#pragma once

// Concave-order dominance between discrete laws. "mu dominates nu" means
// every risk-averse agent weakly prefers mu: E f(mu) <= E f(nu) for every
// convex f, i.e. nu is a mean-preserving spread of mu.

#include <optional>
#include <vector>

#include "riskshare/measures.hpp"

namespace riskshare {

inline constexpr double kDefaultTol = 1e-8;

/// Kernel pi(x, x0) from atoms x of the dominating law to atoms x0 of the
/// dominated one whose conditional means are the row atoms.
struct MartingaleCoupling {
  std::vector<Point> rows;
  std::vector<Point> cols;
  std::vector<double> weights;  // rows.size() x cols.size(), row-major

  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return weights[r * cols.size() + c]; }
};

struct DominanceVerdict {
  bool dominates = false;
  bool strict = false;
  std::optional<MartingaleCoupling> certificate;
  double worst_violation = 0.0;
};

/// Univariate check by stop-loss transforms on the union of supports.
DominanceVerdict dominates_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol = kDefaultTol);

/// Any dimension: feasibility of the martingale-coupling linear program.
DominanceVerdict dominates_md(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol = kDefaultTol);

/// dominates_1d for d = 1, dominates_md otherwise; `strict` is left false.
DominanceVerdict dominates(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol = kDefaultTol);

/// Dominance plus "the laws differ"; strict dominance on discrete laws is
/// exactly that.
DominanceVerdict strictly_dominates(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol = kDefaultTol);

/// Checks a coupling against the marginal and barycenter conditions.
bool certificate_valid(const MartingaleCoupling& pi, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                       double tol = kDefaultTol);

struct AllocationVerdict {
  bool dominates = false;
  bool strict = false;
  std::vector<DominanceVerdict> agents;
};

/// Agent-wise dominance of gamma over gamma0. Both must share the aggregate
/// law (Errc::SumLawMismatch otherwise).
AllocationVerdict allocation_dominates(const JointLaw& gamma, const JointLaw& gamma0, double tol = kDefaultTol);

/// Pairwise comonotonicity of a univariate allocation: every pair of states
/// moves every pair of agents in the same direction.
bool is_comonotone_pairwise(const JointLaw& law, double tol = kDefaultTol);

/// E (X - t)_+ for a univariate law.
double stop_loss(const DiscreteMeasure& m, double t);

}  // namespace riskshare
