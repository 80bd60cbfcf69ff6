#include "riskshare/maxcorr.hpp"

#include <algorithm>
#include <cmath>

#include "riskshare/error.hpp"
#include "riskshare/lp.hpp"

namespace riskshare {

CorrelationResult max_correlation_sorted(const DiscreteMeasure& xi, const DiscreteMeasure& mu) {
  if (xi.dim() != 1 || mu.dim() != 1) {
    throw Error(Errc::DimensionMismatch, "sorted maximal correlation needs univariate laws");
  }
  // Canonical atom order is ascending, so merging the two cumulative weight
  // sequences pairs equal quantile levels.
  CorrelationResult res;
  std::vector<double> cum_a(xi.size());
  std::vector<double> cum_b(mu.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) cum_a[k] = (acc += xi[k].w);
  acc = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) cum_b[k] = (acc += mu[k].w);
  cum_a.back() = 1.0;
  cum_b.back() = 1.0;

  std::size_t a = 0;
  std::size_t b = 0;
  double level = 0.0;
  while (a < xi.size() && b < mu.size()) {
    const double next = std::min(cum_a[a], cum_b[b]);
    const double w = next - level;
    if (w > 0.0) {
      res.value += w * xi[a].x[0] * mu[b].x[0];
      res.coupling.push_back({xi[a].x, mu[b].x, w});
    }
    level = std::max(level, next);
    if (cum_a[a] <= level + 1e-15) ++a;
    if (cum_b[b] <= level + 1e-15) ++b;
  }
  return res;
}

CorrelationResult max_correlation_lp(const DiscreteMeasure& xi, const DiscreteMeasure& mu) {
  if (xi.dim() != mu.dim()) {
    throw Error(Errc::DimensionMismatch, "maximal correlation needs laws of equal dimension");
  }
  const std::size_t n = xi.size();
  const std::size_t m = mu.size();
  lp::LinearProgram prog(static_cast<Eigen::Index>(n + m), static_cast<Eigen::Index>(n * m));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      const auto var = static_cast<Eigen::Index>(r * m + c);
      prog.matrix(static_cast<Eigen::Index>(r), var) = 1.0;
      prog.matrix(static_cast<Eigen::Index>(n + c), var) = 1.0;
      double dot = 0.0;
      for (std::size_t j = 0; j < xi.dim(); ++j) dot += xi[r].x[j] * mu[c].x[j];
      prog.objective[var] = -dot;
    }
    prog.rhs[static_cast<Eigen::Index>(r)] = xi[r].w;
  }
  for (std::size_t c = 0; c < m; ++c) prog.rhs[static_cast<Eigen::Index>(n + c)] = mu[c].w;

  const lp::Outcome out = lp::solve(prog);
  if (out.status != lp::Status::Optimal) {
    throw Error(Errc::SolverFailure, "coupling LP ended with status " + std::string(lp::to_string(out.status)));
  }
  CorrelationResult res;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      const double w = out.solution[static_cast<Eigen::Index>(r * m + c)];
      if (w <= 0.0) continue;
      res.coupling.push_back({xi[r].x, mu[c].x, w});
    }
  }
  res.value = -out.value;
  return res;
}

CorrelationResult max_correlation(const DiscreteMeasure& xi, const DiscreteMeasure& mu, double /*tol*/) {
  if (xi.dim() != mu.dim()) {
    throw Error(Errc::DimensionMismatch, "maximal correlation needs laws of equal dimension");
  }
  return xi.dim() == 1 ? max_correlation_sorted(xi, mu) : max_correlation_lp(xi, mu);
}

GapReport comonotonicity_gap(const JointLaw& gamma, const DiscreteMeasure& mu, double tol) {
  if (gamma.dim() != mu.dim()) {
    throw Error(Errc::DimensionMismatch, "reference law and allocation differ in dimension");
  }
  GapReport rep;
  for (std::size_t i = 0; i < gamma.agents(); ++i) {
    rep.rho_agents.push_back(max_correlation(marginal(gamma, i), mu, tol).value);
    rep.rho_sum += rep.rho_agents.back();
  }
  if (gamma.agents() == 1) {
    rep.rho_total = rep.rho_sum;
    rep.gap = 0.0;
  } else {
    rep.rho_total = max_correlation(sum_pushforward(gamma), mu, tol).value;
    rep.gap = rep.rho_sum - rep.rho_total;
  }
  rep.comonotone_at_tol = rep.gap <= tol;
  return rep;
}

DiscreteMeasure default_reference_measure(std::size_t dim, const BallConfig& ball) {
  if (dim == 0) throw Error(Errc::DimensionMismatch, "dimension must be >= 1");
  ball.validate(dim);
  const double spacing = ball.radius / (2.0 * std::sqrt(static_cast<double>(dim)));
  std::size_t count = 1;
  for (std::size_t j = 0; j < dim; ++j) count *= 5;
  std::vector<Atom> atoms;
  atoms.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Point x(dim);
    std::size_t rest = k;
    for (std::size_t j = 0; j < dim; ++j) {
      x[j] = ball.center_coord(j) + spacing * (static_cast<double>(rest % 5) - 2.0);
      rest /= 5;
    }
    atoms.push_back({std::move(x), 1.0 / static_cast<double>(count)});
  }
  return validate_measure(std::move(atoms));
}

}  // namespace riskshare
