#pragma once
#include <iosfwd>
#include <string>
#include <vector>

namespace ggmsel::cli {

inline constexpr const char* tool_version = "0.1.0";

/// Exit codes of every subcommand.
enum ExitCode : int
{
    exit_ok = 0,
    exit_usage = 2,     ///< bad flags or invalid input data
    exit_numerical = 3, ///< numerical failure
    exit_io = 4,        ///< file system errors
};

/// Runs `ggm-select <args...>`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ggmsel::cli
