#pragma once

// Reverse-mode differentiation over a fixed set of tensor ops.
//
// A Var is a shared handle to a graph node. Ops record their output node on
// the thread's active Tape when at least one input requires a gradient;
// otherwise the output is a plain constant and no graph is retained. Without
// an active tape nothing is recorded, so inference keeps only live values.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "smpler/tensor.hpp"

namespace smpler {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something accumulates into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Zero-initialized gradient buffer with the value's shape.
  Tensor& grad_buffer();
  void accumulate(const Tensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  /// Leaf that collects gradients (a trainable weight or a checked input).
  static Var parameter(Tensor value);

  const Tensor& value() const { return node_->value; }
  /// In-place access for optimizers and finite-difference probes.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad();

  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

/// Ordered record of differentiable op outputs. Recording order is a
/// topological order, so backward() is a single reverse sweep.
class Tape {
 public:
  void record(std::shared_ptr<Node> node) { nodes_.push_back(std::move(node)); }
  /// Seeds d(root)/d(root) = 1; root must be a single element.
  void backward(const Var& root);
  void backward(const Var& root, const Tensor& seed);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

Tape* active_tape();

/// Makes `tape` the recording tape of this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording; ops inside produce constants.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// Test hook: scales the incoming gradient of every node whose op name equals
/// `op` during Tape::backward on this thread. An empty name disables it.
void set_gradient_corruption(const std::string& op, double factor = 1.5);

using BackwardFn = std::function<void(Node&)>;

/// Builds an op output. Checks finiteness, and records `backward` when a tape
/// is active and some input requires a gradient.
Var make_op(Tensor value, const char* op, std::vector<Var> inputs, BackwardFn backward);

}  // namespace smpler
