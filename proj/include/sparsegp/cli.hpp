#pragma once

#include <string>
#include <vector>

namespace sparsegp::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  ///< I/O and other unexpected failures
  kConfigError = 2,
  kDataError = 3,
  kNumericalError = 4,
};

/// Runs the tool with argv-style arguments (args[0] is the program name).
/// Failures print a single line to stderr of the form
///   sparsegp: error kind=<config|data|numerical|io> exit=<code> message=<text>
int run(const std::vector<std::string>& args);

}  // namespace sparsegp::cli
