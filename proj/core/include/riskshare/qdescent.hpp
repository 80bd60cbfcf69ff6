#pragma once

// Dual potential search. For an admissible profile psi (psi_i - w_i convex),
//
//   J(psi) = integral [ sum_i psi_i(x_i) - inf-convolution(sum_i x_i) ] d gamma0
//
// is nonnegative, vanishes iff gamma0 is the optimal sharing law of psi, and
// upper-bounds the improvement statistic. minimize_q lowers J by adding convex
// hinge and affine pieces to the perturbations phi_i.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "riskshare/infconv.hpp"
#include "riskshare/measures.hpp"

namespace riskshare {

struct SignedAtom {
  Point x;
  double w = 0.0;
};

struct QDescentConfig {
  std::size_t max_iters = 500;
  /// Known lower bound on inf J (typically the improvement statistic). Sets the
  /// first trial step (J - target) / slope, capped at the price scale of the
  /// floors; trials are then halved until an Armijo test holds. Zero when absent.
  std::optional<double> target;
  /// Test functions combined per agent and iteration.
  std::size_t cuts_per_iter = 1;
  std::size_t max_halvings = 30;
  /// Stop once J falls below this.
  double j_tolerance = 1e-12;
  /// Pieces per agent above which inactive pieces are pruned.
  std::size_t max_pieces = 48;
};

struct QState {
  StrictlyConvexProfile profile;
  double j = 0.0;
  JointLaw gamma_psi;
  /// Per agent: gamma0^i - gamma_psi^i, merged.
  std::vector<std::vector<SignedAtom>> marginal_discrepancies;
  std::size_t iterations = 0;
  bool iteration_cap_reached = false;
  /// Accepted J values, starting with J at the initial profile.
  std::vector<double> history;
};

double j_value(const StrictlyConvexProfile& psi, const JointLaw& gamma0, const BallConfig& ball);

/// Descends from `start`. The returned state is the best one found.
QState minimize_q(const JointLaw& gamma0, const StrictlyConvexProfile& start, const BallConfig& ball,
                  const QDescentConfig& config = {});

/// Descends from the quadratic floors w_i = (eps_i / 2)|x|^2.
QState minimize_q(const JointLaw& gamma0, std::span<const double> eps, const BallConfig& ball,
                  const QDescentConfig& config = {});

}  // namespace riskshare
