#include "smpler/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "smpler/errors.hpp"

namespace smpler {

namespace {

std::vector<std::size_t> probe_indices(std::size_t size, std::size_t max_components) {
  std::vector<std::size_t> idx;
  if (max_components == 0 || max_components >= size) {
    idx.resize(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    return idx;
  }
  // Stride chosen so the probes spread across the whole tensor.
  const double step = static_cast<double>(size) / static_cast<double>(max_components);
  for (std::size_t k = 0; k < max_components; ++k) {
    idx.push_back(std::min(size - 1, static_cast<std::size_t>(step * (static_cast<double>(k) + 0.5))));
  }
  return idx;
}

double evaluate(const std::function<Var()>& loss) {
  NoGradScope no_grad;
  const Var v = loss();
  const double y = v.item();
  if (!std::isfinite(y)) throw NumericDomainError("grad_check: non-finite function value");
  return y;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult grad_check_leaves(const std::function<Var()>& loss, std::vector<Var> leaves, double eps,
                                  std::size_t max_components_per_leaf) {
  for (auto& l : leaves) {
    if (!l.requires_grad()) throw Error("grad_check_leaves: leaf does not require grad");
    l.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    const Var y = loss();
    if (!std::isfinite(y.item())) throw NumericDomainError("grad_check: non-finite function value");
    tape.backward(y);
  }

  GradCheckResult result;
  std::size_t global = 0;
  for (auto& leaf : leaves) {
    const Tensor analytic = leaf.has_grad() ? leaf.grad() : Tensor(leaf.shape());
    Tensor& x = leaf.mutable_value();
    for (std::size_t i : probe_indices(x.size(), max_components_per_leaf)) {
      const double orig = x[i];
      x[i] = orig + eps;
      const double fp = evaluate(loss);
      x[i] = orig - eps;
      const double fm = evaluate(loss);
      x[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double e = relative_error(analytic[i], numeric);
      if (e >= result.max_rel_error) {
        result.max_rel_error = e;
        result.worst_index = global + i;
      }
      ++result.checked;
    }
    global += x.size();
  }
  return result;
}

GradCheckResult grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps,
                           std::size_t max_components) {
  Var leaf = Var::parameter(x);
  return grad_check_leaves([&] { return f(leaf); }, {leaf}, eps, max_components);
}

}  // namespace smpler
