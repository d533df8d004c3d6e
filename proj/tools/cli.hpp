#pragma once

#include <ostream>

namespace smpler::cli {

// Exit codes shared by every subcommand.
enum Exit : int {
  kOk = 0,
  kFailure = 1,  // command ran but its pass condition did not hold, or an unexpected error
  kParse = 2,
  kInvariant = 3,
  kMemoryBudget = 4,
  kInsufficientPoints = 5,
  kGradcheckFailed = 6,
  kDivergence = 7,
  kNoTraining = 8,
};

/// Runs one command line. Results go to files under --out and a summary to `out`;
/// a failure writes exactly one line to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace smpler::cli
