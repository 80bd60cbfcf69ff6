#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskshare {

enum class Errc {
  EmptyInput,
  NonFinite,
  NonPositiveWeight,
  WeightSumOutOfTolerance,
  DimensionMismatch,
  OutsideBall,
  IndexOutOfRange,
  SumLawMismatch,
  SolverFailure,
  NumericalBreakdown,
  XOutsideDomain,
  NoConvergence,
  NotPositiveDefinite,
  SingularSum,
  ParameterOutOfRange,
  EmptyCandidateSet,
};

std::string_view to_string(Errc code) noexcept;

/// Every library failure is reported through this exception; `code()` lets
/// callers (the CLI in particular) branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace riskshare
