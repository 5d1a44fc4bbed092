// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Reverse-mode differentiation over a recorded tape.
//
// A Var pairs a shared graph node with the tape it is being recorded on.
// Parameter nodes outlive tapes: the same node can be bound to a fresh tape
// every training step via Tape::Bind, and its gradient accumulates across
// backward passes until cleared. Vars with no tape (inference) record
// nothing, and intermediate nodes are released as soon as they go out of
// scope.

#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "plce/nn/tensor.hpp"

namespace plce::nn {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  // Called with this node's grad and value; accumulates into its parents.
  std::function<void(const Tensor<T>& grad, const Tensor<T>& value)> backward;

  void AccumulateGrad(const Tensor<T>& g) {
    if (grad.empty()) {
      grad = g;
    } else {
      grad.Accumulate(g);
    }
  }
  void ZeroGrad() { grad = Tensor<T>(); }
};

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;
  Var(std::shared_ptr<Node<T>> node, Tape<T>* tape)
      : node_(std::move(node)), tape_(tape) {}

  // Constant leaf, never differentiated.
  static Var Constant(Tensor<T> value) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    return Var(std::move(node), nullptr);
  }

  const Tensor<T>& value() const { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  Tape<T>* tape() const { return tape_; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
  Tape<T>* tape_ = nullptr;
};

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Binds a persistent trainable node to this tape.
  Var<T> Bind(const std::shared_ptr<Node<T>>& node) {
    node->requires_grad = true;
    return Var<T>(node, this);
  }

  // Fresh trainable leaf owned by the caller through the returned Var.
  Var<T> Leaf(Tensor<T> value) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    return Bind(node);
  }

  void Record(const std::shared_ptr<Node<T>>& node) { nodes_.push_back(node); }
  std::size_t size() const { return nodes_.size(); }

  // Propagates d(root)/d(.) into every reachable trainable leaf. Interior
  // gradients are reset first so that repeated calls add exactly one more
  // copy of the gradient to each leaf.
  void Backward(const Var<T>& root) {
    if (root.value().size() != 1) {
      throw ShapeError("backward requires a scalar root, got " +
                       ShapeString(root.shape()));
    }
    if (root.tape() != this) {
      throw ShapeError("backward root was not recorded on this tape");
    }
    for (auto& n : nodes_) n->ZeroGrad();
    root.node()->AccumulateGrad(Tensor<T>(root.shape(), T(1)));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.backward && !n.grad.empty()) n.backward(n.grad, n.value);
    }
  }

 private:
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

// Creates the result node of an op. The backward closure is built lazily
// (only when some input requires a gradient and a tape is active), so
// inference pays nothing for saved tensors.
template <typename T, typename MakeBackward>
Var<T> MakeResult(Tensor<T> value, std::initializer_list<const Var<T>*> inputs,
                  MakeBackward&& make_backward) {
  if (!value.AllFinite()) {
    throw NumericError("non-finite value produced, shape " +
                       ShapeString(value.shape()));
  }
  Tape<T>* tape = nullptr;
  bool needs_grad = false;
  for (const Var<T>* in : inputs) {
    if (!tape && in->tape()) tape = in->tape();
    needs_grad = needs_grad || in->requires_grad();
  }
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (tape && needs_grad) {
    node->requires_grad = true;
    node->backward = make_backward();
    tape->Record(node);
  }
  return Var<T>(std::move(node), tape);
}

// Accumulates g into v's node when v is trainable.
template <typename T>
void Propagate(const std::shared_ptr<Node<T>>& node, const Tensor<T>& g) {
  if (node->requires_grad) node->AccumulateGrad(g);
}

}  // namespace plce::nn
