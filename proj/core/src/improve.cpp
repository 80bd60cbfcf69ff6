#include "riskshare/improve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "riskshare/error.hpp"
#include "riskshare/lp.hpp"

namespace riskshare {
namespace {

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

bool inside(const BallConfig& ball, std::span<const double> y) {
  return ball.distance_to_center(y) <= ball.radius * (1.0 + 1e-12);
}

// Deduplicates points up to kMergeDistance and remembers where each input went.
class PointIndex {
 public:
  explicit PointIndex(const std::vector<const Point*>& points) : slot_(points.size()) {
    std::vector<std::size_t> order(points.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return *points[l] < *points[r]; });
    for (std::size_t k : order) {
      const Point& x = *points[k];
      std::size_t hit = unique_.size();
      for (std::size_t u = unique_.size(); u-- > 0;) {
        if (unique_[u][0] < x[0] - kMergeDistance) break;
        if (distance(unique_[u], x) <= kMergeDistance) {
          hit = u;
          break;
        }
      }
      if (hit == unique_.size()) unique_.push_back(x);
      slot_[k] = hit;
    }
  }

  [[nodiscard]] const std::vector<Point>& points() const { return unique_; }
  [[nodiscard]] std::size_t slot(std::size_t input) const { return slot_[input]; }

 private:
  std::vector<Point> unique_;
  std::vector<std::size_t> slot_;
};

std::vector<Point> lattice_in_ball(double step, const BallConfig& ball, std::size_t dim) {
  std::vector<long long> lo(dim);
  std::vector<long long> hi(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    lo[j] = static_cast<long long>(std::ceil((ball.center_coord(j) - ball.radius) / step - 1e-9));
    hi[j] = static_cast<long long>(std::floor((ball.center_coord(j) + ball.radius) / step + 1e-9));
  }
  std::vector<Point> out;
  std::vector<long long> k = lo;
  for (;;) {
    Point y(dim);
    for (std::size_t j = 0; j < dim; ++j) y[j] = static_cast<double>(k[j]) * step;
    if (inside(ball, y)) out.push_back(std::move(y));
    std::size_t j = 0;
    while (j < dim && ++k[j] > hi[j]) {
      k[j] = lo[j];
      ++j;
    }
    if (j == dim) break;
  }
  return out;
}

void check_eps(std::span<const double> eps, std::size_t agents) {
  if (eps.size() != agents) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(agents) + " floor strengths, got " +
                                             std::to_string(eps.size()));
  }
  for (double e : eps) {
    if (!(e > 0.0) || !std::isfinite(e)) throw Error(Errc::ParameterOutOfRange, "eps must be positive");
  }
}

double tuple_cost(const std::vector<Point>& tuple, std::span<const double> eps) {
  double c = 0.0;
  for (std::size_t i = 0; i < tuple.size(); ++i) c += 0.5 * eps[i] * norm2(tuple[i]);
  return c;
}

}  // namespace

std::size_t SplitGrid::size() const {
  std::size_t n = 0;
  for (const auto& c : candidates) n += c.size();
  return n;
}

GridParameters default_grid_parameters(const JointLaw& gamma0) {
  GridParameters g;
  const double r = max_component_norm(gamma0);
  g.radius = r > 0.0 ? 1.25 * r : 1.0;
  const DiscreteMeasure m0 = sum_pushforward(gamma0);
  double spread = 0.0;
  for (std::size_t a = 0; a < m0.size(); ++a) {
    for (std::size_t b = a + 1; b < m0.size(); ++b) spread = std::max(spread, distance(m0[a].x, m0[b].x));
  }
  g.step = spread > 0.0 ? spread / 8.0 : g.radius / 4.0;
  return g;
}

SplitGrid build_split_grid(const JointLaw& gamma0, double step, const BallConfig& ball) {
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(Errc::ParameterOutOfRange, "grid-step must be positive");
  const std::size_t p = gamma0.agents();
  const std::size_t d = gamma0.dim();
  ball.validate(d);
  for (const auto& a : gamma0.atoms()) {
    for (const auto& y : a.x) {
      if (!ball.contains(y)) throw Error(Errc::OutsideBall, "allocation has a component outside the ball");
    }
  }

  SplitGrid grid;
  grid.step = step;
  grid.ball = ball;
  grid.agents = p;
  grid.dim = d;
  grid.aggregate = sum_pushforward(gamma0);
  grid.candidates.resize(grid.aggregate.size());

  // Input splits first, attached to the nearest aggregate atom.
  for (const auto& a : gamma0.atoms()) {
    Point s(d, 0.0);
    for (const auto& y : a.x) {
      for (std::size_t j = 0; j < d; ++j) s[j] += y[j];
    }
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.aggregate.size(); ++k) {
      const double dist = distance(grid.aggregate[k].x, s);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    grid.candidates[best].push_back(a.x);
  }

  const std::vector<Point> lattice = lattice_in_ball(step, ball, d);
  const double raw = std::pow(static_cast<double>(lattice.size()), static_cast<double>(p - 1)) *
                     static_cast<double>(grid.aggregate.size());
  if (raw > 4.0 * static_cast<double>(kMaxImprovementVariables)) {
    throw Error(Errc::ParameterOutOfRange, "split grid would enumerate about " + std::to_string(static_cast<long long>(raw)) +
                                               " candidates; increase the grid step");
  }
  for (std::size_t a = 0; a < grid.aggregate.size(); ++a) {
    const Point& s = grid.aggregate[a].x;
    auto& cands = grid.candidates[a];
    if (p == 1) {
      if (cands.empty()) cands.push_back({s});
    } else if (!lattice.empty()) {
      std::vector<std::size_t> idx(p - 1, 0);
      for (;;) {
        std::vector<Point> tuple;
        tuple.reserve(p);
        Point last = s;
        for (std::size_t i = 0; i + 1 < p; ++i) {
          tuple.push_back(lattice[idx[i]]);
          for (std::size_t j = 0; j < d; ++j) last[j] -= lattice[idx[i]][j];
        }
        if (inside(ball, last)) {
          tuple.push_back(std::move(last));
          cands.push_back(std::move(tuple));
        }
        std::size_t i = 0;
        while (i < idx.size() && ++idx[i] == lattice.size()) {
          idx[i] = 0;
          ++i;
        }
        if (i == idx.size()) break;
      }
    }
    // Deduplicate, keeping the first occurrence (input splits come first).
    std::vector<std::vector<Point>> unique;
    for (auto& t : cands) {
      const bool seen = std::any_of(unique.begin(), unique.end(), [&](const std::vector<Point>& u) {
        for (std::size_t i = 0; i < p; ++i) {
          if (distance(u[i], t[i]) > kMergeDistance) return false;
        }
        return true;
      });
      if (!seen) unique.push_back(std::move(t));
    }
    cands = std::move(unique);
    if (cands.empty()) throw Error(Errc::EmptyCandidateSet, "aggregate atom without candidate splits");
  }
  return grid;
}

double floor_objective(const JointLaw& law, std::span<const double> eps) {
  check_eps(eps, law.agents());
  double v = 0.0;
  for (const auto& a : law.atoms()) v += a.w * tuple_cost(a.x, eps);
  return v;
}

EfficiencyReport solve_improvement_lp(const JointLaw& gamma0, const SplitGrid& grid, std::span<const double> eps,
                                      double tol) {
  const std::size_t p = gamma0.agents();
  const std::size_t d = gamma0.dim();
  check_eps(eps, p);
  if (grid.agents != p || grid.dim != d) throw Error(Errc::DimensionMismatch, "grid does not match allocation");
  for (const auto& c : grid.candidates) {
    if (c.empty()) throw Error(Errc::EmptyCandidateSet, "aggregate atom without candidate splits");
  }

  // Flatten candidates.
  std::vector<std::size_t> owner;
  std::vector<const std::vector<Point>*> tuples;
  for (std::size_t a = 0; a < grid.candidates.size(); ++a) {
    for (const auto& t : grid.candidates[a]) {
      owner.push_back(a);
      tuples.push_back(&t);
    }
  }
  const std::size_t n_split = tuples.size();

  // Support of each unknown marginal, and of each gamma0 marginal.
  std::vector<PointIndex> supports;
  std::vector<DiscreteMeasure> targets;
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<const Point*> pts;
    pts.reserve(n_split);
    for (const auto* t : tuples) pts.push_back(&(*t)[i]);
    supports.emplace_back(pts);
    targets.push_back(marginal(gamma0, i));
  }

  std::size_t n_vars = n_split;
  std::size_t n_rows = grid.aggregate.size();
  std::vector<std::size_t> kernel_offset(p);
  std::vector<std::size_t> row_offset(p);
  for (std::size_t i = 0; i < p; ++i) {
    kernel_offset[i] = n_vars;
    row_offset[i] = n_rows;
    const std::size_t u = supports[i].points().size();
    const std::size_t v = targets[i].size();
    n_vars += u * v;
    n_rows += u + v + u * d;
  }
  if (n_vars > kMaxImprovementVariables) {
    throw Error(Errc::ParameterOutOfRange, "improvement LP would have " + std::to_string(n_vars) +
                                               " variables; increase the grid step");
  }

  lp::LinearProgram prog(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_vars));
  const auto at = [&](std::size_t r, std::size_t c) -> double& {
    return prog.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  };

  for (std::size_t a = 0; a < grid.aggregate.size(); ++a) prog.rhs[static_cast<Eigen::Index>(a)] = grid.aggregate[a].w;
  for (std::size_t k = 0; k < n_split; ++k) {
    at(owner[k], k) = 1.0;
    prog.objective[static_cast<Eigen::Index>(k)] = tuple_cost(*tuples[k], eps);
  }

  for (std::size_t i = 0; i < p; ++i) {
    const auto& us = supports[i].points();
    const std::size_t nu = us.size();
    const std::size_t nv = targets[i].size();
    const std::size_t link = row_offset[i];
    const std::size_t marg = link + nu;
    const std::size_t bary = marg + nv;
    // gamma^i(u) = sum_v pi_i(u, v)
    for (std::size_t k = 0; k < n_split; ++k) at(link + supports[i].slot(k), k) += 1.0;
    for (std::size_t u = 0; u < nu; ++u) {
      for (std::size_t v = 0; v < nv; ++v) {
        const std::size_t var = kernel_offset[i] + u * nv + v;
        at(link + u, var) = -1.0;
        at(marg + v, var) = 1.0;
        for (std::size_t j = 0; j < d; ++j) at(bary + u * d + j, var) = targets[i][v].x[j] - us[u][j];
      }
    }
    for (std::size_t v = 0; v < nv; ++v) prog.rhs[static_cast<Eigen::Index>(marg + v)] = targets[i][v].w;
  }

  const lp::Outcome out = lp::solve(prog);
  if (out.status != lp::Status::Optimal) {
    throw Error(Errc::SolverFailure, "improvement LP ended with status " + std::string(lp::to_string(out.status)));
  }

  // Read off gamma*, dropping round-off mass and restoring each aggregate
  // atom's weight exactly.
  std::vector<double> mass(grid.aggregate.size(), 0.0);
  std::vector<double> weight(n_split, 0.0);
  for (std::size_t k = 0; k < n_split; ++k) {
    const double w = out.solution[static_cast<Eigen::Index>(k)];
    if (w > 1e-13) {
      weight[k] = w;
      mass[owner[k]] += w;
    }
  }
  std::vector<TupleAtom> atoms;
  for (std::size_t k = 0; k < n_split; ++k) {
    if (weight[k] <= 0.0) continue;
    atoms.push_back({*tuples[k], weight[k] * grid.aggregate[owner[k]].w / mass[owner[k]]});
  }

  EfficiencyReport rep;
  rep.improved = validate_joint_law(std::move(atoms));
  rep.objective_at_input = floor_objective(gamma0, eps);
  rep.objective_at_optimum = floor_objective(rep.improved, eps);
  rep.statistic = rep.objective_at_input - rep.objective_at_optimum;
  rep.comonotone_at_tol = rep.statistic <= tol;
  rep.lp_variables = n_vars;
  rep.lp_rows = n_rows;
  rep.lp_iterations = out.iterations;
  rep.verdict = allocation_dominates(rep.improved, gamma0, kDefaultTol);
  if (!rep.verdict.dominates) {
    throw Error(Errc::SolverFailure, "improved law failed the dominance re-check (LP encoding defect)");
  }
  return rep;
}

double efficiency_statistic(const JointLaw& gamma0, std::span<const double> eps, double step, const BallConfig& ball,
                            double tol) {
  return solve_improvement_lp(gamma0, build_split_grid(gamma0, step, ball), eps, tol).statistic;
}

}  // namespace riskshare
