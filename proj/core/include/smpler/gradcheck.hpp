#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "smpler/autodiff.hpp"

namespace smpler {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

/// Compares the taped gradient of scalar f at x against central finite
/// differences, component by component. `max_components` > 0 checks an
/// evenly strided subset of that many entries.
GradCheckResult grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps = 1e-5,
                           std::size_t max_components = 0);

/// Same check for a scalar function of many leaves: the leaves' values are
/// perturbed in place and restored. `loss` must rebuild the graph on every call.
GradCheckResult grad_check_leaves(const std::function<Var()>& loss, std::vector<Var> leaves, double eps = 1e-5,
                                  std::size_t max_components_per_leaf = 0);

}  // namespace smpler
