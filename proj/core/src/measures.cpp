#include "riskshare/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "riskshare/error.hpp"

namespace riskshare {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

struct FlatAtom {
  Point key;
  double w;
};

// Sorts lexicographically and merges atoms within kMergeDistance. Candidates
// for a merge share the first coordinate up to the threshold, so only the tail
// of the output needs to be scanned.
std::vector<FlatAtom> merge_sorted(std::vector<FlatAtom> items) {
  std::sort(items.begin(), items.end(),
            [](const FlatAtom& a, const FlatAtom& b) { return a.key < b.key; });
  const double threshold2 = kMergeDistance * kMergeDistance;
  std::vector<FlatAtom> out;
  out.reserve(items.size());
  for (auto& item : items) {
    bool merged = false;
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
      if (it->key[0] < item.key[0] - kMergeDistance) break;
      if (squared_distance(it->key, item.key) <= threshold2) {
        it->w += item.w;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(std::move(item));
  }
  return out;
}

double checked_total(std::span<const double> weights) {
  double total = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double w = weights[k];
    if (!std::isfinite(w)) {
      throw Error(Errc::NonFinite, "weight of atom " + std::to_string(k) + " is not finite");
    }
    if (w <= 0.0) {
      std::ostringstream os;
      os << "weight of atom " << k << " is " << w;
      throw Error(Errc::NonPositiveWeight, os.str());
    }
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "weights sum to " << total;
    throw Error(Errc::WeightSumOutOfTolerance, os.str());
  }
  // Totals within summation rounding are left alone so validation is idempotent.
  return std::abs(total - 1.0) <= 64.0 * std::numeric_limits<double>::epsilon() ? 1.0 : total;
}

void check_finite(std::span<const double> x, std::size_t atom) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw Error(Errc::NonFinite, "coordinate of atom " + std::to_string(atom) + " is not finite");
    }
  }
}

}  // namespace

double BallConfig::distance_to_center(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - center_coord(j);
    s += d * d;
  }
  return std::sqrt(s);
}

bool BallConfig::contains(std::span<const double> x, double slack) const {
  return distance_to_center(x) <= radius * (1.0 + slack) + slack;
}

void BallConfig::validate(std::size_t dim) const {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw Error(Errc::ParameterOutOfRange, "ball radius must be positive and finite");
  }
  if (!center.empty() && center.size() != dim) {
    throw Error(Errc::DimensionMismatch, "ball center has dimension " + std::to_string(center.size()) +
                                             ", expected " + std::to_string(dim));
  }
}

Point DiscreteMeasure::mean() const {
  Point m(dim_, 0.0);
  for (const auto& a : atoms_) {
    for (std::size_t j = 0; j < dim_; ++j) m[j] += a.w * a.x[j];
  }
  return m;
}

DiscreteMeasure validate_measure(std::vector<Atom> raw, const std::optional<BallConfig>& ball) {
  if (raw.empty()) throw Error(Errc::EmptyInput, "measure has no atoms");
  const std::size_t dim = raw.front().x.size();
  if (dim == 0) throw Error(Errc::DimensionMismatch, "atoms must have dimension >= 1");

  std::vector<double> weights;
  weights.reserve(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (raw[k].x.size() != dim) {
      throw Error(Errc::DimensionMismatch, "atom " + std::to_string(k) + " has dimension " +
                                               std::to_string(raw[k].x.size()) + ", expected " +
                                               std::to_string(dim));
    }
    check_finite(raw[k].x, k);
    weights.push_back(raw[k].w);
  }
  const double total = checked_total(weights);
  if (ball) {
    ball->validate(dim);
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (!ball->contains(raw[k].x)) {
        throw Error(Errc::OutsideBall, "atom " + std::to_string(k) + " lies outside the ball");
      }
    }
  }

  std::vector<FlatAtom> flat;
  flat.reserve(raw.size());
  for (auto& a : raw) flat.push_back({std::move(a.x), a.w / total});
  auto merged = merge_sorted(std::move(flat));

  DiscreteMeasure m;
  m.dim_ = dim;
  m.atoms_.reserve(merged.size());
  for (auto& f : merged) m.atoms_.push_back({std::move(f.key), f.w});
  return m;
}

JointLaw validate_joint_law(std::vector<TupleAtom> raw, const std::optional<BallConfig>& ball) {
  if (raw.empty()) throw Error(Errc::EmptyInput, "joint law has no atoms");
  const std::size_t agents = raw.front().x.size();
  if (agents == 0) throw Error(Errc::DimensionMismatch, "tuples must have at least one agent");
  const std::size_t dim = raw.front().x.front().size();
  if (dim == 0) throw Error(Errc::DimensionMismatch, "points must have dimension >= 1");
  if (ball) ball->validate(dim);

  std::vector<double> weights;
  weights.reserve(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (raw[k].x.size() != agents) {
      throw Error(Errc::DimensionMismatch, "atom " + std::to_string(k) + " has " +
                                               std::to_string(raw[k].x.size()) + " agents, expected " +
                                               std::to_string(agents));
    }
    for (const auto& y : raw[k].x) {
      if (y.size() != dim) {
        throw Error(Errc::DimensionMismatch, "atom " + std::to_string(k) + " has a point of dimension " +
                                                 std::to_string(y.size()) + ", expected " +
                                                 std::to_string(dim));
      }
      check_finite(y, k);
      if (ball && !ball->contains(y)) {
        throw Error(Errc::OutsideBall, "atom " + std::to_string(k) + " has a component outside the ball");
      }
    }
    weights.push_back(raw[k].w);
  }
  const double total = checked_total(weights);

  std::vector<FlatAtom> flat;
  flat.reserve(raw.size());
  for (const auto& a : raw) {
    Point key;
    key.reserve(agents * dim);
    for (const auto& y : a.x) key.insert(key.end(), y.begin(), y.end());
    flat.push_back({std::move(key), a.w / total});
  }
  auto merged = merge_sorted(std::move(flat));

  JointLaw law;
  law.agents_ = agents;
  law.dim_ = dim;
  law.atoms_.reserve(merged.size());
  for (const auto& f : merged) {
    TupleAtom t;
    t.w = f.w;
    t.x.reserve(agents);
    for (std::size_t i = 0; i < agents; ++i) {
      t.x.emplace_back(f.key.begin() + static_cast<std::ptrdiff_t>(i * dim),
                       f.key.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    }
    law.atoms_.push_back(std::move(t));
  }
  return law;
}

DiscreteMeasure marginal(const JointLaw& law, std::size_t agent) {
  if (agent >= law.agents()) {
    throw Error(Errc::IndexOutOfRange, "agent index " + std::to_string(agent) + " out of range [0, " +
                                           std::to_string(law.agents()) + ")");
  }
  std::vector<Atom> raw;
  raw.reserve(law.size());
  for (const auto& a : law.atoms()) raw.push_back({a.x[agent], a.w});
  return validate_measure(std::move(raw));
}

DiscreteMeasure sum_pushforward(const JointLaw& law) {
  std::vector<Atom> raw;
  raw.reserve(law.size());
  for (const auto& a : law.atoms()) {
    Point s(law.dim(), 0.0);
    for (const auto& y : a.x) {
      for (std::size_t j = 0; j < s.size(); ++j) s[j] += y[j];
    }
    raw.push_back({std::move(s), a.w});
  }
  return validate_measure(std::move(raw));
}

namespace {

template <class AtomT, class Distance>
bool match_atoms(std::span<const AtomT> a, std::span<const AtomT> b, double tol, Distance dist) {
  std::vector<bool> used(b.size(), false);
  double unmatched_b = 0.0;
  for (const auto& x : a) {
    bool found = false;
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (used[k] || dist(x, b[k]) > tol) continue;
      if (std::abs(x.w - b[k].w) > tol) return false;
      used[k] = true;
      found = true;
      break;
    }
    if (!found && x.w > tol) return false;
  }
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (!used[k]) unmatched_b = std::max(unmatched_b, b[k].w);
  }
  return unmatched_b <= tol;
}

}  // namespace

bool same_law(const DiscreteMeasure& a, const DiscreteMeasure& b, double tol) {
  if (a.dim() != b.dim()) return false;
  return match_atoms<Atom>(a.atoms(), b.atoms(), tol, [](const Atom& x, const Atom& y) {
    return std::sqrt(squared_distance(x.x, y.x));
  });
}

bool same_law(const JointLaw& a, const JointLaw& b, double tol) {
  if (a.agents() != b.agents() || a.dim() != b.dim()) return false;
  return match_atoms<TupleAtom>(a.atoms(), b.atoms(), tol, [](const TupleAtom& x, const TupleAtom& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.x.size(); ++i) s += squared_distance(x.x[i], y.x[i]);
    return std::sqrt(s);
  });
}

double max_norm(const DiscreteMeasure& m) {
  double r = 0.0;
  for (const auto& a : m.atoms()) r = std::max(r, std::sqrt(squared_distance(a.x, Point(a.x.size(), 0.0))));
  return r;
}

double max_component_norm(const JointLaw& law) {
  double r = 0.0;
  for (const auto& a : law.atoms()) {
    for (const auto& y : a.x) r = std::max(r, std::sqrt(squared_distance(y, Point(y.size(), 0.0))));
  }
  return r;
}

}  // namespace riskshare
