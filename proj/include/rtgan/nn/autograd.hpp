#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rtgan/nn/tensor.hpp"

namespace rtgan::nn {

template <typename Scalar>
struct Node {
  using Vector = typename Tensor<Scalar>::Vector;

  Tensor<Scalar> value;
  Vector grad;  // empty until something flows into this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool has_grad() const { return grad.size() != 0; }

  Vector& grad_buffer() {
    if (!has_grad()) grad = Vector::Zero(value.size());
    return grad;
  }

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (!requires_grad) return;
    grad_buffer() += g;
  }
};

// Reference-counted handle to a node in a dynamically built computation graph.
template <typename Scalar>
class Var {
 public:
  using NodeT = Node<Scalar>;
  using Vector = typename Tensor<Scalar>::Vector;

  Var() = default;
  explicit Var(Tensor<Scalar> value, bool requires_grad = false) : node_(std::make_shared<NodeT>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<NodeT> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor<Scalar>& value() const { return node_->value; }
  Tensor<Scalar>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index dim(std::size_t axis) const { return node_->value.dim(axis); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return node_->has_grad(); }
  const Vector& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0); }

  // Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<NodeT>& node() const { return node_; }

 private:
  std::shared_ptr<NodeT> node_;
};

// Builds an op result. When no parent requires a gradient the node is a constant leaf.
template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, std::vector<Var<Scalar>> inputs,
                        std::function<void(Node<Scalar>&)> backward_fn) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Var<Scalar>(std::move(node));
}

// Reverse-mode sweep from a scalar root. Gradients accumulate into every leaf that requires one.
template <typename Scalar>
void backward(const Var<Scalar>& root) {
  if (root.value().size() != 1) throw ContractError("backward() needs a scalar root");
  if (!root.requires_grad()) return;

  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> seen;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Scalar>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* node = *it;
    if (node->backward_fn && node->has_grad()) node->backward_fn(*node);
  }
  // Interior gradients are scratch space; only leaves keep theirs.
  for (Node<Scalar>* node : order) {
    if (node->backward_fn) node->grad.resize(0);
  }
}

}  // namespace rtgan::nn
