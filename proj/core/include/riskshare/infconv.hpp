#pragma once

// Optimal sharing of an aggregate x among p agents with convex costs psi_i:
//
//   inf-convolution(x) = min { sum_i psi_i(y_i) : sum_i y_i = x, y_i in B },
//
// where psi_i(y) = 1/2 y^T Q_i y + max_k (a_k . y + b_k). The quadratic part
// is the strict-convexity floor w_i (Q_i = eps_i I unless given explicitly),
// the max-affine part is the convex perturbation phi_i = psi_i - w_i.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "riskshare/measures.hpp"

namespace riskshare {

struct AffinePiece {
  Point slope;
  double intercept = 0.0;
};

struct AgentProfile {
  double eps = 1.0;
  /// Overrides eps * I as the floor Hessian when set.
  std::optional<Eigen::MatrixXd> floor_matrix;
  std::vector<AffinePiece> pieces;
};

class StrictlyConvexProfile {
 public:
  /// Validates eps > 0, SPD floors, slope dimensions; adds the zero piece to
  /// agents without pieces and removes duplicate pieces.
  StrictlyConvexProfile(std::size_t dim, std::vector<AgentProfile> agents);

  /// p agents with floors (eps_i / 2)|y|^2 and no affine perturbation.
  static StrictlyConvexProfile quadratic(std::size_t dim, std::span<const double> eps);

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t agents() const noexcept { return agents_.size(); }
  [[nodiscard]] const AgentProfile& agent(std::size_t i) const { return agents_[i]; }
  [[nodiscard]] std::span<const AgentProfile> all() const noexcept { return agents_; }

  [[nodiscard]] const Eigen::MatrixXd& floor_hessian(std::size_t i) const { return hessians_[i]; }
  /// w_i(y) = 1/2 y^T Q_i y
  [[nodiscard]] double floor(std::size_t i, std::span<const double> y) const;
  /// phi_i(y) = max_k (a_k . y + b_k)
  [[nodiscard]] double perturbation(std::size_t i, std::span<const double> y) const;
  [[nodiscard]] double value(std::size_t i, std::span<const double> y) const {
    return floor(i, y) + perturbation(i, y);
  }
  /// Modulus of strict convexity of the floor: theta_i(t) = lambda_min(Q_i) t^2 / 2.
  [[nodiscard]] double modulus(std::size_t i, double t) const;
  /// Only the zero affine piece.
  [[nodiscard]] bool pure_quadratic(std::size_t i) const;
  [[nodiscard]] bool pure_quadratic() const;

 private:
  std::size_t dim_;
  std::vector<AgentProfile> agents_;
  std::vector<Eigen::MatrixXd> hessians_;
  std::vector<double> min_eigen_;
};

/// argmin over y in B of psi(y) - price . y, with the ball multiplier.
struct AgentResponse {
  Eigen::VectorXd y;
  double multiplier = 0.0;
};

AgentResponse best_response(const StrictlyConvexProfile& psi, std::size_t agent, const Eigen::VectorXd& price,
                            const BallConfig& ball);

struct SharingPoint {
  Point x;
  std::vector<Point> shares;
  Point price;
  std::vector<double> multipliers;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool closed_form = false;
};

struct ShareOptions {
  bool allow_closed_form = true;
  /// Starting dual price; defaults to the price of the quadratic floors.
  std::optional<Point> initial_price;
  std::size_t max_iterations = 10000;
};

/// Unique optimal split of x. Throws XOutsideDomain (x not in pB) and
/// NoConvergence (dual ascent hit the iteration cap).
SharingPoint share_point(const StrictlyConvexProfile& psi, const Point& x, const BallConfig& ball,
                         const ShareOptions& options = {});

double inf_convolution_value(const StrictlyConvexProfile& psi, const Point& x, const BallConfig& ball);

/// Law of (T^1(X), ..., T^p(X)) for X ~ m0.
JointLaw sharing_law(const StrictlyConvexProfile& psi, const DiscreteMeasure& m0, const BallConfig& ball);

/// T^i = S_i (S_1 + ... + S_p)^-1: the linear sharing rule of the quadratic
/// costs psi_i(y) = 1/2 <S_i^-1 y, y> without ball constraint.
std::vector<Eigen::MatrixXd> quadratic_sharing_matrix(std::span<const Eigen::MatrixXd> s);

/// Throws NotPositiveDefinite unless `s` is symmetric with LDL^T pivots above 1e-12.
void require_spd(const Eigen::MatrixXd& s, const char* what);

/// The two-agent planar families showing that comonotone sharing rules are
/// unbounded (T1 grows like sqrt(n)) and not convex (det(M1 + M1') < 0).
struct CounterexampleDiagnostics {
  int n = 1;
  double eps = 0.5;
  Eigen::Matrix2d s1, s2;  // unbounded family
  Eigen::Matrix2d t1;
  double t1_norm = 0.0;
  Eigen::Matrix2d s1_prime, s2_prime, s1_eps, s2_eps;  // non-convex family
  Eigen::Matrix2d m1, m2, m1_prime, m2_prime;
  double det_m1_sum = 0.0;  // det(M1 + M1')
};

CounterexampleDiagnostics counterexample_family(int n, double eps);

}  // namespace riskshare
