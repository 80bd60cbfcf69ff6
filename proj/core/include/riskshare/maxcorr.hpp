#pragma once

#include <vector>

#include "riskshare/convex_order.hpp"
#include "riskshare/measures.hpp"

namespace riskshare {

struct CouplingAtom {
  Point x;
  Point y;
  double w = 0.0;
};

/// rho_mu(xi) = max over couplings of E[X . Y] with X ~ xi, Y ~ mu, and the
/// coupling that attains it.
struct CorrelationResult {
  double value = 0.0;
  std::vector<CouplingAtom> coupling;
};

/// Sorted quantile merge when d = 1, transport LP otherwise.
CorrelationResult max_correlation(const DiscreteMeasure& xi, const DiscreteMeasure& mu, double tol = kDefaultTol);

/// Always the LP route; kept public as the oracle for the sorted path.
CorrelationResult max_correlation_lp(const DiscreteMeasure& xi, const DiscreteMeasure& mu);

/// Comonotone (quantile) coupling of two univariate laws.
CorrelationResult max_correlation_sorted(const DiscreteMeasure& xi, const DiscreteMeasure& mu);

struct GapReport {
  std::vector<double> rho_agents;
  double rho_sum = 0.0;
  double rho_total = 0.0;
  double gap = 0.0;
  /// gap <= tol. On atomic reference laws this is consistent with, not a proof
  /// of, mu-comonotonicity; a larger gap refutes it.
  bool comonotone_at_tol = false;
};

GapReport comonotonicity_gap(const JointLaw& gamma, const DiscreteMeasure& mu, double tol = kDefaultTol);

/// Uniform law on the 5^d lattice {-2,...,2}^d * radius / (2 sqrt d) around
/// the ball center; every point lies in the ball.
DiscreteMeasure default_reference_measure(std::size_t dim, const BallConfig& ball);

}  // namespace riskshare
