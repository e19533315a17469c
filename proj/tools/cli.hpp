#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace straintc::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { ok = 0, usage_error = 1, numerical_failure = 2 };

/// Runs the tool with argv-style arguments (without the program name).
/// Diagnostics go to `err` as a single line; progress to `out`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// Environment variable naming the default output directory.
inline constexpr const char *out_dir_env = "STRAINTC_OUT_DIR";

} // namespace straintc::cli
