#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace smpler {

struct GradSuiteOptions {
  /// "default" probes more components per tensor than "tiny".
  std::string preset = "default";
  /// Op tag whose backward is deliberately corrupted (harness self-test).
  std::string corrupt_op;
  double tolerance = 1e-4;
  double eps = 1e-5;
  std::uint64_t seed = 7;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Finite-difference checks of every differentiable op plus the composite
/// modules and the end-to-end tiny model loss.
std::vector<GradCheckEntry> run_gradcheck_suite(const GradSuiteOptions& opt);

}  // namespace smpler
