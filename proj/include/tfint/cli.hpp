#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tfint {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one command line (without the program name) and returns the exit
/// code: 0 success, 2 validation error, 3 data error, 4 internal error.
/// Failures print one line to `err`:
///   error code=<code> exit=<n> message="<text>"
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tfint
