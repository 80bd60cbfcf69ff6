#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace riskshare::cli {

/// Exit codes: 0 affirmative or success, 1 negative verdict, 2 input or runtime error.
inline constexpr int kAffirmative = 0;
inline constexpr int kNegative = 1;
inline constexpr int kError = 2;

/// Runs one command. `args` excludes the program name. The JSON report goes to
/// `out`, a one-line human summary (or diagnostic) to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace riskshare::cli
