#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tsel::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kInputError = 2,      // unreadable file, schema violation, bad flags
  kSemanticError = 3,   // inputs parse but do not fit together
  kFixtureError = 4,    // bundled fixture failed its integrity check
  kToleranceFailure = 5 // reproduce: a statistic outside its tolerance
};

/// Runs the tool on `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsel::cli
