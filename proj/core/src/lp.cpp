#include "riskshare/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "riskshare/error.hpp"

namespace riskshare::lp {

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
  }
  return "Unknown";
}

namespace {

using Index = Eigen::Index;

struct SparseColumn {
  std::vector<Index> rows;
  std::vector<double> vals;
};

enum class PhaseResult { Optimal, Unbounded };

class RevisedSimplex {
 public:
  RevisedSimplex(const LinearProgram& lp, const SolverOptions& options) : opt_(options) {
    if (lp.objective.size() != lp.cols() || lp.rhs.size() != lp.rows()) {
      throw Error(Errc::DimensionMismatch, "linear program has inconsistent dimensions");
    }
    if (!lp.matrix.allFinite() || !lp.objective.allFinite() || !lp.rhs.allFinite()) {
      throw Error(Errc::NonFinite, "linear program has non-finite entries");
    }
    m_ = lp.rows();
    n_ = lp.cols();
    sign_.assign(static_cast<std::size_t>(m_), 1.0);
    b_ = lp.rhs;
    for (Index r = 0; r < m_; ++r) {
      if (b_[r] < 0.0) {
        sign_[static_cast<std::size_t>(r)] = -1.0;
        b_[r] = -b_[r];
      }
    }
    row_map_.resize(static_cast<std::size_t>(m_));
    for (Index r = 0; r < m_; ++r) row_map_[static_cast<std::size_t>(r)] = r;
    cols_.resize(static_cast<std::size_t>(n_));
    for (Index j = 0; j < n_; ++j) {
      auto& col = cols_[static_cast<std::size_t>(j)];
      for (Index r = 0; r < m_; ++r) {
        const double v = lp.matrix(r, j);
        if (v != 0.0) {
          col.rows.push_back(r);
          col.vals.push_back(v * sign_[static_cast<std::size_t>(r)]);
        }
      }
    }
    c_ = lp.objective;

    // Artificial basis: one unit column per row.
    basis_.resize(static_cast<std::size_t>(m_));
    basic_.assign(static_cast<std::size_t>(n_ + m_), 0);
    for (Index r = 0; r < m_; ++r) {
      basis_[static_cast<std::size_t>(r)] = n_ + r;
      basic_[static_cast<std::size_t>(n_ + r)] = 1;
    }
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    xb_ = b_;
  }

  // Runs phase 1 and removes artificials; returns the residual infeasibility.
  double phase_one() {
    const auto cost = [this](Index j) { return j >= n_ ? 1.0 : 0.0; };
    iterate(cost, opt_.optimality_tolerance);
    refactor();
    double infeasibility = 0.0;
    for (Index r = 0; r < m_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] >= n_) infeasibility += std::max(0.0, xb_[r]);
    }
    return infeasibility;
  }

  void drive_out_artificials() {
    std::vector<Index> redundant;
    for (Index r = 0; r < m_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] < n_) continue;
      const Eigen::RowVectorXd rho = binv_.row(r);
      Index best = -1;
      double best_abs = opt_.redundancy_tolerance;
      for (Index j = 0; j < n_; ++j) {
        if (basic_[static_cast<std::size_t>(j)]) continue;
        const double v = dot(rho.transpose(), j);
        if (std::abs(v) > best_abs) {
          best_abs = std::abs(v);
          best = j;
        }
      }
      if (best < 0) {
        redundant.push_back(r);
        continue;
      }
      const Eigen::VectorXd u = ftran(best);
      xb_[r] = 0.0;
      pivot(r, best, u, 0.0);
    }
    if (!redundant.empty()) drop_rows(redundant);
  }

  PhaseResult phase_two() {
    const double cmax = c_.size() > 0 ? c_.cwiseAbs().maxCoeff() : 0.0;
    const double tol = opt_.optimality_tolerance * (cmax > 0.0 ? cmax : 1.0);
    const auto cost = [this](Index j) { return j >= n_ ? 0.0 : c_[j]; };
    const PhaseResult res = iterate(cost, tol);
    refactor();
    return res;
  }

  [[nodiscard]] Eigen::VectorXd primal() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (Index r = 0; r < m_; ++r) {
      const Index j = basis_[static_cast<std::size_t>(r)];
      if (j < n_) {
        double v = xb_[r];
        if (v < 0.0 && v > -opt_.feasibility_tolerance) v = 0.0;
        x[j] = v;
      }
    }
    return x;
  }

  // Duals in the numbering and sign convention of the caller's rows.
  [[nodiscard]] Eigen::VectorXd duals(Index original_rows) const {
    Eigen::VectorXd cb(m_);
    for (Index r = 0; r < m_; ++r) {
      const Index j = basis_[static_cast<std::size_t>(r)];
      cb[r] = j < n_ ? c_[j] : 0.0;
    }
    const Eigen::VectorXd y = binv_.transpose() * cb;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(original_rows);
    for (Index r = 0; r < m_; ++r) {
      const Index orig = row_map_[static_cast<std::size_t>(r)];
      out[orig] = y[r] * sign_[static_cast<std::size_t>(orig)];
    }
    return out;
  }

  [[nodiscard]] std::vector<Index> basis() const { return basis_; }
  [[nodiscard]] const std::vector<Index>& dropped() const { return dropped_; }
  [[nodiscard]] std::size_t iterations() const { return iterations_; }
  [[nodiscard]] bool bland() const { return bland_; }

  void dump_tableau(std::ostream& os) const {
    os << "basic";
    for (Index j = 0; j < n_; ++j) os << ",v" << j;
    os << ",rhs\n";
    for (Index r = 0; r < m_; ++r) {
      os << basis_[static_cast<std::size_t>(r)];
      for (Index j = 0; j < n_; ++j) os << ',' << dot(binv_.row(r).transpose(), j);
      os << ',' << xb_[r] << '\n';
    }
  }

 private:
  double dot(const Eigen::VectorXd& y, Index j) const {
    if (j >= n_) return y[j - n_];
    const auto& col = cols_[static_cast<std::size_t>(j)];
    double s = 0.0;
    for (std::size_t k = 0; k < col.rows.size(); ++k) s += y[col.rows[k]] * col.vals[k];
    return s;
  }

  // B^-1 a_j
  Eigen::VectorXd ftran(Index j) const {
    if (j >= n_) return binv_.col(j - n_);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m_);
    const auto& col = cols_[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < col.rows.size(); ++k) u.noalias() += col.vals[k] * binv_.col(col.rows[k]);
    return u;
  }

  template <class Cost>
  PhaseResult iterate(const Cost& cost, double tol) {
    Eigen::VectorXd cb(m_);
    std::size_t since_refactor = 0;
    for (;;) {
      if (iterations_ >= opt_.max_iterations) {
        throw Error(Errc::SolverFailure, "simplex iteration cap of " + std::to_string(opt_.max_iterations) +
                                             " reached");
      }
      if (since_refactor >= opt_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }
      for (Index r = 0; r < m_; ++r) cb[r] = cost(basis_[static_cast<std::size_t>(r)]);
      const Eigen::VectorXd y = binv_.transpose() * cb;

      Index entering = -1;
      double best = -tol;
      for (Index j = 0; j < n_; ++j) {
        if (basic_[static_cast<std::size_t>(j)]) continue;
        const double d = cost(j) - dot(y, j);
        if (bland_) {
          if (d < -tol) {
            entering = j;
            break;
          }
        } else if (d < best) {
          best = d;
          entering = j;
        }
      }
      if (entering < 0) return PhaseResult::Optimal;

      const Eigen::VectorXd u = ftran(entering);
      Index leave = -1;
      double theta = std::numeric_limits<double>::infinity();
      for (Index r = 0; r < m_; ++r) {
        if (u[r] <= opt_.pivot_tolerance) continue;
        const double ratio = std::max(0.0, xb_[r]) / u[r];
        const double tie = 1e-12 * std::max(1.0, theta);
        if (leave < 0 || ratio < theta - tie) {
          theta = ratio;
          leave = r;
        } else if (ratio <= theta + tie) {
          const bool better = bland_ ? basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)]
                                     : u[r] > u[leave];
          if (better) {
            theta = std::min(theta, ratio);
            leave = r;
          }
        }
      }
      if (leave < 0) return PhaseResult::Unbounded;

      if (theta <= 1e-12) {
        if (++degenerate_run_ > 3 * static_cast<std::size_t>(n_)) bland_ = true;
      } else {
        degenerate_run_ = 0;
      }
      pivot(leave, entering, u, theta);
      ++since_refactor;
    }
  }

  void pivot(Index leave, Index entering, const Eigen::VectorXd& u, double theta) {
    xb_.noalias() -= theta * u;
    xb_[leave] = theta;
    const double piv = u[leave];
    if (std::abs(piv) <= opt_.pivot_tolerance * 1e-3) {
      throw Error(Errc::NumericalBreakdown, "pivot element below tolerance");
    }
    const Eigen::RowVectorXd pivot_row = binv_.row(leave) / piv;
    binv_.noalias() -= u * pivot_row;
    binv_.row(leave) = pivot_row;
    basic_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(leave)])] = 0;
    basis_[static_cast<std::size_t>(leave)] = entering;
    basic_[static_cast<std::size_t>(entering)] = 1;
    ++iterations_;
  }

  void refactor() {
    if (m_ == 0) return;
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m_, m_);
    for (Index r = 0; r < m_; ++r) {
      const Index j = basis_[static_cast<std::size_t>(r)];
      if (j >= n_) {
        basis_matrix(j - n_, r) = 1.0;
      } else {
        const auto& col = cols_[static_cast<std::size_t>(j)];
        for (std::size_t k = 0; k < col.rows.size(); ++k) basis_matrix(col.rows[k], r) = col.vals[k];
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
    if (!(lu.rcond() > 1e-14)) {
      throw Error(Errc::NumericalBreakdown, "basis matrix became singular");
    }
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
  }

  void drop_rows(const std::vector<Index>& redundant) {
    std::vector<char> drop(static_cast<std::size_t>(m_), 0);
    for (Index r : redundant) drop[static_cast<std::size_t>(r)] = 1;
    std::vector<Index> new_index(static_cast<std::size_t>(m_), -1);
    Index kept = 0;
    for (Index r = 0; r < m_; ++r) {
      if (!drop[static_cast<std::size_t>(r)]) new_index[static_cast<std::size_t>(r)] = kept++;
    }
    for (auto& col : cols_) {
      SparseColumn next;
      for (std::size_t k = 0; k < col.rows.size(); ++k) {
        const Index nr = new_index[static_cast<std::size_t>(col.rows[k])];
        if (nr >= 0) {
          next.rows.push_back(nr);
          next.vals.push_back(col.vals[k]);
        }
      }
      col = std::move(next);
    }
    Eigen::VectorXd b(kept);
    std::vector<Index> basis;
    std::vector<Index> row_map;
    for (Index r = 0; r < m_; ++r) {
      if (drop[static_cast<std::size_t>(r)]) {
        dropped_.push_back(row_map_[static_cast<std::size_t>(r)]);
        basic_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])] = 0;
        continue;
      }
      b[new_index[static_cast<std::size_t>(r)]] = b_[r];
      basis.push_back(basis_[static_cast<std::size_t>(r)]);
      row_map.push_back(row_map_[static_cast<std::size_t>(r)]);
    }
    // Every remaining basic variable is structural here, so artificial
    // indices (>= n_) no longer refer to rows and need no renumbering.
    m_ = kept;
    b_ = std::move(b);
    basis_ = std::move(basis);
    row_map_ = std::move(row_map);
    std::sort(dropped_.begin(), dropped_.end());
    refactor();
  }

  const SolverOptions& opt_;
  Index m_ = 0;
  Index n_ = 0;
  std::vector<double> sign_;
  std::vector<Index> row_map_;
  std::vector<SparseColumn> cols_;
  Eigen::VectorXd b_;
  Eigen::VectorXd c_;
  std::vector<Index> basis_;
  std::vector<char> basic_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
  std::vector<Index> dropped_;
  std::size_t iterations_ = 0;
  std::size_t degenerate_run_ = 0;
  bool bland_ = false;
};

}  // namespace

Outcome solve(const LinearProgram& lp, const SolverOptions& options) {
  RevisedSimplex simplex(lp, options);
  Outcome out;
  const double infeasibility = simplex.phase_one();
  if (infeasibility > options.feasibility_tolerance) {
    out.status = Status::Infeasible;
    out.value = infeasibility;
    out.iterations = simplex.iterations();
    out.bland_engaged = simplex.bland();
    return out;
  }
  simplex.drive_out_artificials();
  const auto res = simplex.phase_two();
  out.status = res == PhaseResult::Optimal ? Status::Optimal : Status::Unbounded;
  out.solution = simplex.primal();
  out.value = lp.objective.dot(out.solution);
  out.duals = simplex.duals(lp.rows());
  out.dropped_rows = simplex.dropped();
  out.iterations = simplex.iterations();
  out.bland_engaged = simplex.bland();
  out.basis = simplex.basis();
  if (options.tableau_dump != nullptr) simplex.dump_tableau(*options.tableau_dump);
  return out;
}

Outcome feasible(const LinearProgram& lp, const SolverOptions& options) {
  RevisedSimplex simplex(lp, options);
  Outcome out;
  const double infeasibility = simplex.phase_one();
  out.value = infeasibility;
  out.iterations = simplex.iterations();
  out.bland_engaged = simplex.bland();
  if (infeasibility > options.feasibility_tolerance) {
    out.status = Status::Infeasible;
    return out;
  }
  simplex.drive_out_artificials();
  out.status = Status::Optimal;
  out.solution = simplex.primal();
  out.dropped_rows = simplex.dropped();
  out.basis = simplex.basis();
  if (options.tableau_dump != nullptr) simplex.dump_tableau(*options.tableau_dump);
  return out;
}

Certificate certify(const LinearProgram& lp, const Outcome& out) {
  Certificate cert;
  if (out.solution.size() != lp.cols()) {
    cert.primal_residual = std::numeric_limits<double>::infinity();
    return cert;
  }
  const Eigen::VectorXd r = lp.matrix * out.solution - lp.rhs;
  cert.primal_residual = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  if (out.solution.size() > 0) cert.primal_residual = std::max(cert.primal_residual, -out.solution.minCoeff());
  if (out.duals.size() == lp.rows()) {
    const Eigen::VectorXd reduced = lp.objective - lp.matrix.transpose() * out.duals;
    for (Eigen::Index j = 0; j < reduced.size(); ++j) {
      cert.dual_infeasibility = std::max(cert.dual_infeasibility, -reduced[j]);
      cert.complementarity = std::max(cert.complementarity, std::abs(out.solution[j] * reduced[j]));
    }
    cert.duality_gap = std::abs(lp.objective.dot(out.solution) - out.duals.dot(lp.rhs));
  }
  return cert;
}

bool certified_optimal(const Certificate& cert, double objective_value) {
  return cert.primal_residual <= 1e-8 && cert.complementarity <= 1e-7 &&
         cert.duality_gap <= 1e-7 * (1.0 + std::abs(objective_value));
}

const Backend& default_backend() {
  static const SimplexBackend backend;
  return backend;
}

}  // namespace riskshare::lp
