#include "crackgan/autograd.hpp"

#include <unordered_set>

#include "crackgan/error.hpp"

namespace crackgan {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape()) grad = Tensor::zeros_like(value);
  return grad;
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0.0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!g_grad_enabled) return Var(std::move(node));
  bool needs = false;
  for (const Var& p : parents) needs = needs || p.requires_grad();
  if (!needs) return Var(std::move(node));
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (Var& p : parents) node->parents.push_back(p.shared());
  node->backward = std::move(backward);
  return Var(std::move(node));
}

Var detach(const Var& v) { return Var::constant(v.value()); }

void backward(const Var& root, const Tensor& seed) { backward(std::vector<Var>{root}, std::vector<Tensor>{seed}); }

void backward(const std::vector<Var>& roots, const std::vector<Tensor>& seeds) {
  if (roots.size() != seeds.size()) throw ShapeError("backward: roots and seeds differ in count");
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (!seeds[i].same_shape(roots[i].value())) {
      throw ShapeError("backward seed shape " + to_string(seeds[i].shape()) + " does not match " +
                       to_string(roots[i].shape()));
    }
  }

  // Iterative post-order DFS; reverse gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  for (const Var& root : roots) {
    if (!root.requires_grad() || !visited.insert(root.node()).second) continue;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* parent = node->parents[next++].get();
        if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  // Interior gradients are recomputed for every call.
  for (Node* n : order) {
    if (n->backward) n->grad = Tensor::zeros_like(n->value);
  }
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (roots[i].requires_grad()) roots[i].node()->grad_buffer() += seeds[i];
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      n->backward(*n);
      n->grad = Tensor();
    }
  }
}

}  // namespace crackgan
