#pragma once

// Dense two-phase revised simplex for
//
//   minimize c.v  subject to  A v = b,  v >= 0.
//
// Phase 1 drives artificial variables to zero, redundant equality rows are
// detected while pivoting artificials out of the basis, and Bland's rule
// replaces Dantzig pricing after a run of 3n degenerate pivots.

#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace riskshare::lp {

enum class Status { Optimal, Infeasible, Unbounded };

std::string_view to_string(Status s) noexcept;

struct LinearProgram {
  LinearProgram() = default;
  LinearProgram(Eigen::Index rows, Eigen::Index cols)
      : objective(Eigen::VectorXd::Zero(cols)), matrix(Eigen::MatrixXd::Zero(rows, cols)),
        rhs(Eigen::VectorXd::Zero(rows)) {}

  Eigen::VectorXd objective;
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;

  [[nodiscard]] Eigen::Index rows() const noexcept { return matrix.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return matrix.cols(); }
};

struct SolverOptions {
  double pivot_tolerance = 1e-11;
  double feasibility_tolerance = 1e-8;
  double redundancy_tolerance = 1e-10;
  /// Relative to max |c_j|.
  double optimality_tolerance = 1e-9;
  std::size_t refactor_interval = 64;
  std::size_t max_iterations = 500000;
  /// When set, the final tableau B^-1 A is written here as CSV.
  std::ostream* tableau_dump = nullptr;
};

struct Outcome {
  Status status = Status::Infeasible;
  double value = 0.0;
  Eigen::VectorXd solution;
  Eigen::VectorXd duals;
  std::vector<Eigen::Index> dropped_rows;
  std::size_t iterations = 0;
  bool bland_engaged = false;
  /// Basic variable per retained row, in row order (useful for basis comparisons).
  std::vector<Eigen::Index> basis;
};

/// Residuals proving an Optimal outcome.
struct Certificate {
  double primal_residual = 0.0;     // max |A v - b|, and max(0, -v_j)
  double dual_infeasibility = 0.0;  // max(0, -(c - A^T y)_j)
  double complementarity = 0.0;     // max |v_j (c - A^T y)_j|
  double duality_gap = 0.0;         // |c.v - y.b|
};

Certificate certify(const LinearProgram& lp, const Outcome& out);

/// True if `cert` satisfies the published optimality thresholds.
bool certified_optimal(const Certificate& cert, double objective_value);

/// Full two-phase solve. Throws Error(NumericalBreakdown) if the basis becomes
/// singular and Error(SolverFailure) if the iteration cap is hit.
Outcome solve(const LinearProgram& lp, const SolverOptions& options = {});

/// Phase 1 only; the objective of `lp` is ignored. On success status is
/// Optimal, `value` is the residual infeasibility and `solution` a feasible point.
Outcome feasible(const LinearProgram& lp, const SolverOptions& options = {});

/// Seam for plugging another solver in behind the same contract.
class Backend {
 public:
  virtual ~Backend() = default;
  [[nodiscard]] virtual std::string_view name() const = 0;
  [[nodiscard]] virtual Outcome solve(const LinearProgram& lp, const SolverOptions& options) const = 0;
  [[nodiscard]] virtual Outcome feasible(const LinearProgram& lp, const SolverOptions& options) const = 0;
};

class SimplexBackend final : public Backend {
 public:
  [[nodiscard]] std::string_view name() const override { return "revised-simplex"; }
  [[nodiscard]] Outcome solve(const LinearProgram& lp, const SolverOptions& options) const override {
    return lp::solve(lp, options);
  }
  [[nodiscard]] Outcome feasible(const LinearProgram& lp, const SolverOptions& options) const override {
    return lp::feasible(lp, options);
  }
};

const Backend& default_backend();

}  // namespace riskshare::lp
