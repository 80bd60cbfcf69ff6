#include "riskshare/convex_order.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskshare/error.hpp"
#include "riskshare/lp.hpp"

namespace riskshare {
namespace {

void require_same_dim(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != nu.dim()) {
    throw Error(Errc::DimensionMismatch, "measures have dimensions " + std::to_string(mu.dim()) + " and " +
                                             std::to_string(nu.dim()));
  }
}

double mean_gap(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const Point a = mu.mean();
  const Point b = nu.mean();
  double g = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) g = std::max(g, std::abs(a[j] - b[j]));
  return g;
}

}  // namespace

double stop_loss(const DiscreteMeasure& m, double t) {
  double s = 0.0;
  for (const auto& a : m.atoms()) s += a.w * std::max(0.0, a.x[0] - t);
  return s;
}

DominanceVerdict dominates_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
  require_same_dim(mu, nu);
  if (mu.dim() != 1) throw Error(Errc::DimensionMismatch, "dominates_1d needs univariate measures");

  DominanceVerdict v;
  double worst = mean_gap(mu, nu);
  bool ok = worst <= tol;
  // Stop-loss transforms on the merged (sorted) support, swept from the right:
  // between consecutive support points each grows by its tail mass times the gap.
  std::size_t i = mu.size();
  std::size_t j = nu.size();
  double s_mu = 0.0, s_nu = 0.0, tail_mu = 0.0, tail_nu = 0.0;
  double prev = 0.0;
  bool first = true;
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  while (i > 0 || j > 0) {
    const double t = std::max(i > 0 ? mu[i - 1].x[0] : kNone, j > 0 ? nu[j - 1].x[0] : kNone);
    if (!first) {
      s_mu += tail_mu * (prev - t);
      s_nu += tail_nu * (prev - t);
    }
    const double excess = s_mu - s_nu;
    worst = std::max(worst, excess);
    if (excess > tol) ok = false;
    while (i > 0 && mu[i - 1].x[0] == t) tail_mu += mu[--i].w;
    while (j > 0 && nu[j - 1].x[0] == t) tail_nu += nu[--j].w;
    prev = t;
    first = false;
  }
  v.dominates = ok;
  v.worst_violation = std::max(0.0, worst);
  return v;
}

DominanceVerdict dominates_md(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
  require_same_dim(mu, nu);
  const std::size_t n = mu.size();
  const std::size_t m = nu.size();
  const std::size_t d = mu.dim();

  // Variables pi(r, c), row-major. Rows: n row sums, m column sums, n*d barycenters.
  lp::LinearProgram prog(static_cast<Eigen::Index>(n + m + n * d), static_cast<Eigen::Index>(n * m));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      const auto var = static_cast<Eigen::Index>(r * m + c);
      prog.matrix(static_cast<Eigen::Index>(r), var) = 1.0;
      prog.matrix(static_cast<Eigen::Index>(n + c), var) = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        prog.matrix(static_cast<Eigen::Index>(n + m + r * d + j), var) = nu[c].x[j] - mu[r].x[j];
      }
    }
    prog.rhs[static_cast<Eigen::Index>(r)] = mu[r].w;
  }
  for (std::size_t c = 0; c < m; ++c) prog.rhs[static_cast<Eigen::Index>(n + c)] = nu[c].w;

  lp::SolverOptions opts;
  opts.feasibility_tolerance = tol;
  const lp::Outcome out = lp::feasible(prog, opts);

  DominanceVerdict v;
  v.worst_violation = out.value;
  if (out.status != lp::Status::Optimal) return v;
  v.dominates = true;
  MartingaleCoupling pi;
  pi.weights.resize(n * m);
  for (std::size_t k = 0; k < n * m; ++k) pi.weights[k] = out.solution[static_cast<Eigen::Index>(k)];
  for (const auto& a : mu.atoms()) pi.rows.push_back(a.x);
  for (const auto& a : nu.atoms()) pi.cols.push_back(a.x);
  v.certificate = std::move(pi);
  return v;
}

DominanceVerdict dominates(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
  require_same_dim(mu, nu);
  return mu.dim() == 1 ? dominates_1d(mu, nu, tol) : dominates_md(mu, nu, tol);
}

DominanceVerdict strictly_dominates(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
  DominanceVerdict v = dominates(mu, nu, tol);
  v.strict = v.dominates && !same_law(mu, nu, tol);
  return v;
}

bool certificate_valid(const MartingaleCoupling& pi, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                       double tol) {
  const std::size_t n = mu.size();
  const std::size_t m = nu.size();
  if (pi.rows.size() != n || pi.cols.size() != m || pi.weights.size() != n * m) return false;
  for (double w : pi.weights) {
    if (w < -tol) return false;
  }
  for (std::size_t r = 0; r < n; ++r) {
    double mass = 0.0;
    Point bary(mu.dim(), 0.0);
    for (std::size_t c = 0; c < m; ++c) {
      mass += pi.at(r, c);
      for (std::size_t j = 0; j < mu.dim(); ++j) bary[j] += pi.at(r, c) * nu[c].x[j];
    }
    if (std::abs(mass - mu[r].w) > tol) return false;
    for (std::size_t j = 0; j < mu.dim(); ++j) {
      if (std::abs(bary[j] - mass * mu[r].x[j]) > tol) return false;
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    double mass = 0.0;
    for (std::size_t r = 0; r < n; ++r) mass += pi.at(r, c);
    if (std::abs(mass - nu[c].w) > tol) return false;
  }
  return true;
}

AllocationVerdict allocation_dominates(const JointLaw& gamma, const JointLaw& gamma0, double tol) {
  if (gamma.agents() != gamma0.agents() || gamma.dim() != gamma0.dim()) {
    throw Error(Errc::DimensionMismatch, "allocations differ in agent count or dimension");
  }
  if (!same_law(sum_pushforward(gamma), sum_pushforward(gamma0), tol)) {
    throw Error(Errc::SumLawMismatch, "allocations do not share the aggregate law");
  }
  AllocationVerdict out;
  out.dominates = true;
  for (std::size_t i = 0; i < gamma.agents(); ++i) {
    auto v = strictly_dominates(marginal(gamma, i), marginal(gamma0, i), tol);
    out.dominates = out.dominates && v.dominates;
    out.strict = out.strict || v.strict;
    out.agents.push_back(std::move(v));
  }
  out.strict = out.dominates && out.strict;
  return out;
}

bool is_comonotone_pairwise(const JointLaw& law, double tol) {
  if (law.dim() != 1) {
    throw Error(Errc::DimensionMismatch, "pairwise comonotonicity is defined for univariate components");
  }
  const auto atoms = law.atoms();
  const std::size_t p = law.agents();
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    for (std::size_t b = a + 1; b < atoms.size(); ++b) {
      for (std::size_t i = 0; i < p; ++i) {
        const double di = atoms[b].x[i][0] - atoms[a].x[i][0];
        for (std::size_t j = i + 1; j < p; ++j) {
          const double dj = atoms[b].x[j][0] - atoms[a].x[j][0];
          if (di * dj < -tol) return false;
        }
      }
    }
  }
  return true;
}

}  // namespace riskshare
