#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "xmod/core/tensor.hpp"

namespace xmod {

// Define-by-run reverse-mode autodiff. Each op allocates a Node whose
// backward closure scatters this node's grad into its parents' grads.
// Graphs are per-step DAGs; parameters are long-lived leaf nodes.
template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  bool grad_alloced = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;
  const char* op = "";
};

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

template <class T>
NodePtr<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->op = "leaf";
  return n;
}

// When no parent needs gradients the closure and edges are dropped, so
// inference passes never retain graph history.
template <class T>
NodePtr<T> make_node(Tensor<T> value, std::vector<NodePtr<T>> parents,
                     std::function<void(Node<T>&)> backward_fn, const char* op) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  for (const auto& p : parents)
    if (p && p->requires_grad) needs = true;
  n->requires_grad = needs;
  if (needs) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

template <class T>
void ensure_grad(Node<T>& n) {
  if (!n.grad_alloced) {
    n.grad = Tensor<T>(n.value.shape());
    n.grad_alloced = true;
  }
}

template <class T>
NodePtr<T> detach(const NodePtr<T>& n) {
  return make_leaf<T>(n->value, false);
}

namespace detail {

template <class T>
void topo_visit(const NodePtr<T>& n, std::unordered_set<const Node<T>*>& seen,
                std::vector<NodePtr<T>>& order) {
  // Iterative DFS; graphs can be a few hundred nodes deep.
  std::vector<std::pair<NodePtr<T>, size_t>> stack;
  if (!n || seen.count(n.get())) return;
  stack.emplace_back(n, 0);
  seen.insert(n.get());
  while (!stack.empty()) {
    auto& [cur, idx] = stack.back();
    if (idx < cur->parents.size()) {
      NodePtr<T> next = cur->parents[idx++];
      if (next && next->requires_grad && !seen.count(next.get())) {
        seen.insert(next.get());
        stack.emplace_back(next, 0);
      }
    } else {
      order.push_back(cur);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Reverse-mode pass from a scalar root. Grads of every node reachable from
// the root are reset first, so parameter leaves carry exactly this pass's
// gradients afterwards.
template <class T>
void backward(const NodePtr<T>& root) {
  if (!root->requires_grad)
    throw ShapeError("backward: root does not require grad");
  if (root->value.numel() != 1)
    throw ShapeError("backward: root must be scalar, got " + root->value.shape_str());

  std::unordered_set<const Node<T>*> seen;
  std::vector<NodePtr<T>> order;
  detail::topo_visit(root, seen, order);

  for (auto& n : order) {
    n->grad = Tensor<T>(n->value.shape());
    n->grad_alloced = true;
  }
  root->grad[0] = T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace xmod
