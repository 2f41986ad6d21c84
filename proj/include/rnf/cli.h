#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rnf {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,   // unexpected internal error
  kExitUsage = 2,     // bad flags, config or input data
  kExitNumeric = 3,   // NaN/Inf during training, failed bench cross-check
  kExitMismatch = 4,  // checkpoint does not fit the vocabulary or task
};

/// Runs one subcommand (train, eval, analyze, bench, search). `args` excludes
/// the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rnf
