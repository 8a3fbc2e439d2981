#include "pnidiff/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

namespace pnidiff {

Var Var::leaf(Grid value, bool trainable) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = trainable;
  n->needs_grad = trainable;
  return Var(n);
}

Var Var::constant(Grid value) { return leaf(std::move(value), false); }

const Grid& Var::zero_grad_view() const {
  // lazily allocate so callers can always read a zero gradient
  return const_cast<Node*>(n_.get())->ensure_grad();
}

namespace detail {

NodePtr make_node(Grid value, std::vector<NodePtr> parents, std::function<void(Node&)> vjp) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->vjp = std::move(vjp);
  for (const auto& p : n->parents)
    if (p->needs_grad) {
      n->needs_grad = true;
      break;
    }
  return n;
}

}  // namespace detail

void backward(const Var& root) {
  Node* r = root.node().get();
  if (r->value.numel() != 1)
    throw std::invalid_argument("backward: root must be scalar, got shape " +
                                shape_to_string(r->value.shape));
  if (r->backward_done) throw std::logic_error("backward: graph already differentiated");

  // iterative post-order DFS; reversed order runs the VJPs root-first
  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(r, 0);
  seen.insert(r);
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Node* p = node->parents[next_child++].get();
      if (!p->parents.empty() || p->vjp) {  // leaves need no visit
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  r->ensure_grad().data[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    n->backward_done = true;
    if (n->vjp && n->needs_grad) {
      n->ensure_grad();
      n->vjp(*n);
    }
  }
}

void zero_grads(const std::vector<Var>& params) {
  for (const auto& p : params) const_cast<Var&>(p).zero_grad();
}

}  // namespace pnidiff
