#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bintest::cli {

enum ExitCode : int {
  kExitPass = 0,
  kExitFail = 1,
  kExitConfigError = 2,
  kExitCertificateFailure = 3,
};

/// Runs the command line `args` (without the program name). Reports and
/// tables go to the configured output directory; progress and verdicts to
/// `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bintest::cli
