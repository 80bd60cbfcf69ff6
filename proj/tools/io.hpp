#pragma once

// JSON encodings of measures, joint laws and profiles.
//
//   measure    {"dim": d, "atoms": [{"x": [..], "w": r}, ...]}
//   joint law  {"agents": p, "dim": d, "atoms": [{"x": [[..], ...], "w": r}, ...]}
//   profile    {"agents": p, "dim": d,
//               "profiles": [{"eps": r, "pieces": [{"a": [..], "b": r}],
//                             "floor_matrix": [[..], ...]}]}
//
// An optional "version": 1 is accepted everywhere. Emitted documents always
// carry it.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "riskshare/infconv.hpp"
#include "riskshare/measures.hpp"

namespace riskshare::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Malformed text ("<source>:<line>:<col>: ...") or a schema violation
/// ("<source>: <field path>: ...").
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json parse_text(const std::string& text, const std::string& source);
Json read_file(const std::filesystem::path& path);

DiscreteMeasure measure_from_json(const Json& doc, const std::string& source,
                                  const std::optional<BallConfig>& ball = std::nullopt);
JointLaw joint_law_from_json(const Json& doc, const std::string& source,
                             const std::optional<BallConfig>& ball = std::nullopt);
StrictlyConvexProfile profile_from_json(const Json& doc, const std::string& source);

Json to_json(const DiscreteMeasure& m);
Json to_json(const JointLaw& law);
Json to_json(const StrictlyConvexProfile& psi);

/// Compact single-line dump; doubles use the shortest form that re-parses
/// to the same value.
std::string dump(const Json& doc);

}  // namespace riskshare::io
