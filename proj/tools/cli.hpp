#pragma once

#include <iosfwd>

namespace selex::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kQuadrature = 3,
  kOptimizer = 4,
  kReplicate = 5,
};

/// Parses argv and runs one subcommand, writing reports to `out` and
/// diagnostics to `err`. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace selex::cli
