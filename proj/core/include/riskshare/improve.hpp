#pragma once

// Discretized improvement problem: over joint laws gamma supported on a
// lattice of candidate splits of each aggregate atom, with the same aggregate
// law as gamma0 and agent marginals dominating those of gamma0, minimize
//
//   integral of sum_i w_i(y_i) d gamma,    w_i(y) = (eps_i / 2)|y|^2.
//
// Dominance is encoded with one martingale kernel per agent, so the whole
// problem is a single linear program. The drop in objective relative to
// gamma0 is the efficiency statistic: zero iff no strict improvement exists
// on the grid.

#include <cstddef>
#include <span>
#include <vector>

#include "riskshare/convex_order.hpp"
#include "riskshare/measures.hpp"

namespace riskshare {

struct SplitGrid {
  double step = 1.0;
  BallConfig ball;
  std::size_t agents = 0;
  std::size_t dim = 0;
  DiscreteMeasure aggregate;
  /// candidates[a][k] is a tuple of `agents` points summing to aggregate[a].
  std::vector<std::vector<std::vector<Point>>> candidates;

  [[nodiscard]] std::size_t size() const;
};

struct GridParameters {
  double step = 1.0;
  double radius = 1.0;
};

/// step = (diameter of the aggregate support) / 8, radius = 1.25 * largest
/// component norm; falls back to radius / 4 and 1.0 for degenerate inputs.
GridParameters default_grid_parameters(const JointLaw& gamma0);

/// Lattice splits (y_1..y_{p-1} on step * Z^d inside B, y_p the remainder when
/// it lies in B) plus every split already used by gamma0.
SplitGrid build_split_grid(const JointLaw& gamma0, double step, const BallConfig& ball);

struct EfficiencyReport {
  double statistic = 0.0;
  JointLaw improved;
  AllocationVerdict verdict;
  bool comonotone_at_tol = false;
  double objective_at_input = 0.0;
  double objective_at_optimum = 0.0;
  std::size_t lp_variables = 0;
  std::size_t lp_rows = 0;
  std::size_t lp_iterations = 0;
};

/// Upper bound on the LP size accepted by solve_improvement_lp.
inline constexpr std::size_t kMaxImprovementVariables = 60000;

EfficiencyReport solve_improvement_lp(const JointLaw& gamma0, const SplitGrid& grid, std::span<const double> eps,
                                      double tol = kDefaultTol);

double efficiency_statistic(const JointLaw& gamma0, std::span<const double> eps, double step, const BallConfig& ball,
                            double tol = kDefaultTol);

/// integral of sum_i (eps_i / 2)|x_i|^2 d law
double floor_objective(const JointLaw& law, std::span<const double> eps);

}  // namespace riskshare
