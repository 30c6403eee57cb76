#pragma once

#include <iosfwd>

namespace kleinbox::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kNonConvergence = 3,
  kAcceptanceFailure = 4,
};

/// Entry point of the `kleinbox` tool. Subcommands: levels, ldos, pipeline,
/// rerun. Reports go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kleinbox::cli
