#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ljcr::cli {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kNumeric = 3,
  kNonConvergence = 4,
};

/// Runs one invocation; `args` excludes the program name. Reports go to
/// `out` (silenced by --quiet), diagnostics and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string usage();

}  // namespace ljcr::cli
