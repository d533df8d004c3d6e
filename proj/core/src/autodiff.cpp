#include "smpler/autodiff.hpp"

#include <string>

#include "smpler/errors.hpp"

namespace smpler {

namespace {
thread_local Tape* t_tape = nullptr;
thread_local std::string t_corrupt_op;
thread_local double t_corrupt_factor = 1.0;
}

void set_gradient_corruption(const std::string& op, double factor) {
  t_corrupt_op = op;
  t_corrupt_factor = factor;
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

void Node::accumulate(const Tensor& g) {
  Tensor& buf = grad_buffer();
  if (g.size() != buf.size()) {
    throw ShapeError(std::string("gradient shape mismatch in ") + op + ": " + shape_string(g.shape()) +
                     " vs " + shape_string(buf.shape()));
  }
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

Var Var::constant(Tensor value) {
  require_finite(value, "constant");
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Tensor value) {
  require_finite(value, "parameter");
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

double Var::item() const {
  if (node_->value.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(node_->value.shape()));
  }
  return node_->value[0];
}

void Tape::backward(const Var& root) {
  if (root.value().size() != 1) throw ShapeError("backward root must be a scalar");
  backward(root, Tensor(root.shape(), 1.0));
}

void Tape::backward(const Var& root, const Tensor& seed) {
  root.node()->accumulate(seed);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.empty() || !n.backward) continue;
    if (!t_corrupt_op.empty() && t_corrupt_op == n.op) {
      for (auto& g : n.grad.values()) g *= t_corrupt_factor;
    }
    n.backward(n);
  }
}

Tape* active_tape() { return t_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(t_tape) { t_tape = &tape; }
TapeScope::~TapeScope() { t_tape = previous_; }

NoGradScope::NoGradScope() : previous_(t_tape) { t_tape = nullptr; }
NoGradScope::~NoGradScope() { t_tape = previous_; }

Var make_op(Tensor value, const char* op, std::vector<Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericDomainError(std::string("non-finite output of ") + op);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  Tape* tape = t_tape;
  if (tape) {
    bool needs = false;
    for (const auto& v : inputs) needs = needs || v.requires_grad();
    if (needs) {
      n->requires_grad = true;
      n->inputs.reserve(inputs.size());
      for (auto& v : inputs) n->inputs.push_back(v.shared());
      n->backward = std::move(backward);
      tape->record(n);
    }
  }
  return Var(std::move(n));
}

}  // namespace smpler
