#pragma once

// Shared generators and brute-force oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "riskshare/convex_order.hpp"
#include "riskshare/improve.hpp"
#include "riskshare/measures.hpp"

namespace riskshare::support {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::vector<double> random_weights(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  double s = 0.0;
  for (double& v : w) {
    v = uniform(rng, 0.1, 1.0);
    s += v;
  }
  for (double& v : w) v /= s;
  return w;
}

inline DiscreteMeasure measure_1d(const std::vector<double>& xs, const std::vector<double>& ws) {
  std::vector<Atom> atoms;
  for (std::size_t k = 0; k < xs.size(); ++k) atoms.push_back({{xs[k]}, ws[k]});
  return validate_measure(std::move(atoms));
}

/// Random univariate law with `n` atoms in [lo, hi].
inline DiscreteMeasure random_measure_1d(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> xs(n);
  for (double& x : xs) x = uniform(rng, lo, hi);
  return measure_1d(xs, random_weights(rng, n));
}

inline DiscreteMeasure shifted(const DiscreteMeasure& m, const Point& by) {
  std::vector<Atom> atoms;
  for (const auto& a : m.atoms()) {
    Atom b = a;
    for (std::size_t j = 0; j < b.x.size(); ++j) b.x[j] += by[j];
    atoms.push_back(std::move(b));
  }
  return validate_measure(std::move(atoms));
}

/// Mean-preserving spread: every atom of `m` is split symmetrically.
inline DiscreteMeasure spread_of(const DiscreteMeasure& m, Rng& rng, double scale) {
  std::vector<Atom> atoms;
  for (const auto& a : m.atoms()) {
    Point dir(m.dim());
    for (double& v : dir) v = uniform(rng, -scale, scale);
    Atom l = a;
    Atom r = a;
    for (std::size_t j = 0; j < dir.size(); ++j) {
      l.x[j] -= dir[j];
      r.x[j] += dir[j];
    }
    l.w = r.w = a.w / 2.0;
    atoms.push_back(l);
    atoms.push_back(r);
  }
  return validate_measure(std::move(atoms));
}

/// Random allocation with integer coordinates in [-range, range].
inline JointLaw random_allocation(Rng& rng, std::size_t agents, std::size_t dim, std::size_t atoms, int range) {
  const std::vector<double> w = random_weights(rng, atoms);
  std::vector<TupleAtom> raw;
  for (std::size_t k = 0; k < atoms; ++k) {
    TupleAtom t;
    for (std::size_t i = 0; i < agents; ++i) {
      Point y(dim);
      for (double& v : y) v = uniform_int(rng, -range, range);
      t.x.push_back(std::move(y));
    }
    t.w = w[k];
    raw.push_back(std::move(t));
  }
  return validate_joint_law(std::move(raw));
}

/// Two-agent univariate allocation for which the quadratic floors are already
/// the optimal dual potential: each even aggregate s is split (s/2 + e, s/2 - e)
/// and (s/2 - e, s/2 + e) with equal weights.
inline JointLaw symmetric_spread_allocation(Rng& rng, std::size_t aggregates) {
  std::vector<int> sums;
  while (sums.size() < aggregates) {
    const int s = 2 * uniform_int(rng, -2, 2);
    if (std::find(sums.begin(), sums.end(), s) == sums.end()) sums.push_back(s);
  }
  const std::vector<double> w = random_weights(rng, aggregates);
  std::vector<TupleAtom> raw;
  for (std::size_t k = 0; k < aggregates; ++k) {
    const double half = sums[k] / 2.0;
    const double e = uniform_int(rng, 0, 2);
    raw.push_back({{{half + e}, {half - e}}, w[k] / 2.0});
    raw.push_back({{{half - e}, {half + e}}, w[k] / 2.0});
  }
  return validate_joint_law(std::move(raw));
}

/// Exhaustive search over joint laws supported by the grid whose weights per
/// aggregate atom are multiples of m0(s) / quanta, keeping those whose agent
/// marginals dominate gamma0's. Returns the best improvement of the quadratic
/// floor objective and the law attaining it.
struct BruteForceResult {
  double statistic = -std::numeric_limits<double>::infinity();
  JointLaw best;
  std::size_t laws_checked = 0;
};

inline BruteForceResult brute_force_improvement(const JointLaw& gamma0, const SplitGrid& grid,
                                                std::span<const double> eps, int quanta) {
  const std::size_t p = gamma0.agents();
  const auto cost = [&](const std::vector<Point>& t) {
    double c = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      for (double v : t[i]) c += 0.5 * eps[i] * v * v;
    }
    return c;
  };
  double input = 0.0;
  for (const auto& a : gamma0.atoms()) input += a.w * cost(a.x);

  std::vector<DiscreteMeasure> targets;
  for (std::size_t i = 0; i < p; ++i) targets.push_back(marginal(gamma0, i));

  BruteForceResult best;
  std::vector<std::vector<int>> counts(grid.candidates.size());
  // Enumerate compositions of `quanta` into candidates.size() parts per atom.
  std::function<void(std::size_t, std::size_t, int)> rec = [&](std::size_t a, std::size_t k, int left) {
    if (a == grid.candidates.size()) {
      std::vector<TupleAtom> raw;
      double obj = 0.0;
      for (std::size_t b = 0; b < counts.size(); ++b) {
        for (std::size_t c = 0; c < counts[b].size(); ++c) {
          if (counts[b][c] == 0) continue;
          const double w = grid.aggregate[b].w * counts[b][c] / quanta;
          raw.push_back({grid.candidates[b][c], w});
          obj += w * cost(grid.candidates[b][c]);
        }
      }
      ++best.laws_checked;
      if (input - obj <= best.statistic) return;
      const JointLaw law = validate_joint_law(std::move(raw));
      for (std::size_t i = 0; i < p; ++i) {
        if (!dominates(marginal(law, i), targets[i]).dominates) return;
      }
      best.statistic = input - obj;
      best.best = law;
      return;
    }
    auto& cnt = counts[a];
    if (k == 0) cnt.assign(grid.candidates[a].size(), 0);
    if (k + 1 == cnt.size()) {
      cnt[k] = left;
      rec(a + 1, 0, quanta);
      return;
    }
    for (int q = 0; q <= left; ++q) {
      cnt[k] = q;
      rec(a, k + 1, left - q);
    }
  };
  rec(0, 0, quanta);
  return best;
}

/// Random symmetric positive-definite matrix with eigenvalues in [lo, hi].
inline Eigen::MatrixXd random_spd(Rng& rng, int dim, double lo, double hi) {
  Eigen::MatrixXd a(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) a(r, c) = uniform(rng, -1.0, 1.0);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd ev(dim);
  for (int k = 0; k < dim; ++k) ev[k] = uniform(rng, lo, hi);
  const Eigen::MatrixXd s = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

}  // namespace riskshare::support
