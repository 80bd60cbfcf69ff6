#pragma once

// Finitely supported probability measures on R^d and joint allocation laws on
// (R^d)^p, together with the pushforwards used everywhere else (agent
// marginals and the aggregate-sum law).

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace riskshare {

using Point = std::vector<double>;

/// Atoms closer than this (Euclidean) are merged.
inline constexpr double kMergeDistance = 1e-12;
/// Maximum drift of the total mass that is silently renormalized.
inline constexpr double kWeightTolerance = 1e-9;

/// Closed ball B of radius `radius` around `center` (empty center = origin).
struct BallConfig {
  double radius = 1.0;
  Point center;

  [[nodiscard]] double center_coord(std::size_t j) const { return center.empty() ? 0.0 : center[j]; }
  [[nodiscard]] double distance_to_center(std::span<const double> x) const;
  [[nodiscard]] bool contains(std::span<const double> x, double slack = 1e-9) const;
  /// Throws ParameterOutOfRange / DimensionMismatch when unusable in dimension `dim`.
  void validate(std::size_t dim) const;
};

struct Atom {
  Point x;
  double w = 0.0;
};

struct TupleAtom {
  std::vector<Point> x;  // one point per agent
  double w = 0.0;
};

class DiscreteMeasure {
 public:
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return atoms_.size(); }
  [[nodiscard]] std::span<const Atom> atoms() const noexcept { return atoms_; }
  [[nodiscard]] const Atom& operator[](std::size_t k) const { return atoms_[k]; }
  [[nodiscard]] Point mean() const;

 private:
  friend DiscreteMeasure validate_measure(std::vector<Atom>, const std::optional<BallConfig>&);

  std::size_t dim_ = 0;
  std::vector<Atom> atoms_;
};

class JointLaw {
 public:
  [[nodiscard]] std::size_t agents() const noexcept { return agents_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return atoms_.size(); }
  [[nodiscard]] std::span<const TupleAtom> atoms() const noexcept { return atoms_; }
  [[nodiscard]] const TupleAtom& operator[](std::size_t k) const { return atoms_[k]; }

 private:
  friend JointLaw validate_joint_law(std::vector<TupleAtom>, const std::optional<BallConfig>&);

  std::size_t agents_ = 0;
  std::size_t dim_ = 0;
  std::vector<TupleAtom> atoms_;
};

/// Canonicalizes raw atoms: merges duplicates, renormalizes a drift of at most
/// kWeightTolerance, sorts lexicographically. Throws riskshare::Error.
DiscreteMeasure validate_measure(std::vector<Atom> raw, const std::optional<BallConfig>& ball = std::nullopt);

JointLaw validate_joint_law(std::vector<TupleAtom> raw, const std::optional<BallConfig>& ball = std::nullopt);

/// Law of the `agent`-th component (0-based).
DiscreteMeasure marginal(const JointLaw& law, std::size_t agent);

/// Law of the coordinate sum x_1 + ... + x_p.
DiscreteMeasure sum_pushforward(const JointLaw& law);

/// Equality of laws up to `tol` in atom position and weight; atoms lighter than
/// `tol` may be unmatched.
bool same_law(const DiscreteMeasure& a, const DiscreteMeasure& b, double tol);
bool same_law(const JointLaw& a, const JointLaw& b, double tol);

/// Largest Euclidean norm of any atom / any tuple component.
double max_norm(const DiscreteMeasure& m);
double max_component_norm(const JointLaw& law);

}  // namespace riskshare
