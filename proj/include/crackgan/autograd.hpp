#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "crackgan/tensor.hpp"

namespace crackgan {

// Minimal tape-free reverse-mode autodiff. Every Var owns a node holding its
// value; results of differentiable ops also keep their parents and a closure
// that pushes the node's gradient into them.
struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Zero-initialised gradient buffer of matching shape.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var leaf(Tensor value, bool requires_grad = false);
  static Var constant(Tensor value) { return leaf(std::move(value), false); }

  explicit operator bool() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad();
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }

  Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& shared() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result. The closure is dropped (and the parents released)
// when no parent needs a gradient or grad mode is off.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

// A copy of `v` cut from the graph.
Var detach(const Var& v);

// Accumulates d(seed . root)/d(leaf) into every reachable leaf gradient.
void backward(const Var& root, const Tensor& seed);
// Same for Σ_i seed_i . root_i over several outputs of one graph.
void backward(const std::vector<Var>& roots, const std::vector<Tensor>& seeds);

}  // namespace crackgan
