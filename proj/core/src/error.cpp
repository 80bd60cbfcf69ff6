#include "riskshare/error.hpp"

namespace riskshare {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NonPositiveWeight: return "NonPositiveWeight";
    case Errc::WeightSumOutOfTolerance: return "WeightSumOutOfTolerance";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::OutsideBall: return "OutsideBall";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::SumLawMismatch: return "SumLawMismatch";
    case Errc::SolverFailure: return "SolverFailure";
    case Errc::NumericalBreakdown: return "NumericalBreakdown";
    case Errc::XOutsideDomain: return "XOutsideDomain";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::SingularSum: return "SingularSum";
    case Errc::ParameterOutOfRange: return "ParameterOutOfRange";
    case Errc::EmptyCandidateSet: return "EmptyCandidateSet";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace riskshare
