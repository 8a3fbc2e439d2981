#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pnidiff/grid.hpp"

namespace pnidiff {

// One node of a reverse-mode graph: a value, a gradient accumulator of the
// same shape, and a vector-Jacobian rule pulling this node's gradient back
// into its parents. Interior nodes are created per forward pass; parameter
// leaves persist across passes and accumulate until zero_grad.
struct Node {
  Grid value;
  Grid grad;
  bool requires_grad = false;  // leaf: trainable
  bool needs_grad = false;     // subtree contains a trainable leaf
  bool grad_alloc = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> vjp;  // reads this->grad, accumulates into parents

  Grid& ensure_grad() {
    if (!grad_alloc) {
      grad = Grid(value.shape);
      grad_alloc = true;
    }
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

// Value-semantic handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  static Var leaf(Grid value, bool trainable = true);
  static Var constant(Grid value);

  const Grid& value() const { return n_->value; }
  Grid& value_mut() { return n_->value; }
  const Grid& grad() const { return n_->grad_alloc ? n_->grad : zero_grad_view(); }
  Grid& grad_mut() { return n_->ensure_grad(); }
  bool defined() const { return static_cast<bool>(n_); }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool b) {
    n_->requires_grad = b;
    n_->needs_grad = b;
  }
  NodePtr node() const { return n_; }

  void zero_grad() {
    if (n_->grad_alloc) std::fill(n_->grad.data.begin(), n_->grad.data.end(), 0.0);
  }

 private:
  const Grid& zero_grad_view() const;
  NodePtr n_;
};

// Reverse pass from a scalar root. Each interior node is visited exactly
// once; calling backward twice on the same graph is an error.
void backward(const Var& root);

void zero_grads(const std::vector<Var>& params);

namespace detail {
// Builds an interior node; needs_grad is OR over parents.
NodePtr make_node(Grid value, std::vector<NodePtr> parents, std::function<void(Node&)> vjp);
}  // namespace detail

}  // namespace pnidiff
