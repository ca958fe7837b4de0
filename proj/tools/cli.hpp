#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace brd::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsageError = 2,
  kBudgetExceeded = 3,
};

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace brd::cli
