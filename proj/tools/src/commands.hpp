#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avarkit::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `avarkit` invocation. args[0] is the program name. Progress goes
/// to `out`; failures print a single-line JSON error object to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// File-system safe form of a channel label.
std::string file_stem(const std::string& label);

}  // namespace avarkit::cli
