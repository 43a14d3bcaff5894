#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lipnet::cli {

enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,
  kVerificationFailure = 2,
  kNumericalFailure = 3,
};

/// Runs one command line (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lipnet::cli
