// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over dense tensors. A Tape records the
// forward pass as a list of nodes in creation order; backward walks it in
// reverse, calling each node's local gradient rule.
#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "autosize/errors.hpp"
#include "autosize/tensor.hpp"

namespace autosize::nn {

template <typename T>
struct BasicParameter {
  std::string id;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  /// Eligible for group regularization (attention projections and FFN matrices).
  bool auto_sized = false;

  BasicParameter() = default;
  BasicParameter(std::string name, BasicTensor<T> v, bool sized)
      : id(std::move(name)), value(std::move(v)), grad(value.shape()), auto_sized(sized) {}

  void zero_grad() { grad.fill(T{0}); }
};

using Parameter = BasicParameter<float>;

template <typename T>
class Tape;

/// Handle to a node on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = std::numeric_limits<std::size_t>::max();

  bool valid() const { return tape != nullptr; }
  const BasicTensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  /// With `record_grads` false the tape only evaluates; nothing is differentiable.
  explicit Tape(bool record_grads = true) : record_grads_(record_grads) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_grads_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(BasicTensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, {}, false});
    return {this, nodes_.size() - 1};
  }

  /// Leaf bound to a parameter. Repeated calls return the same node.
  Var<T> param(BasicParameter<T>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    if (p.grad.shape() != p.value.shape()) p.grad = BasicTensor<T>(p.value.shape());
    nodes_.push_back(Node{{}, {}, &p, {}, record_grads_});
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return {this, nodes_.size() - 1};
  }

  /// Records an op result. `backward` runs only if some input needs a gradient.
  Var<T> record(BasicTensor<T> value, bool needs_grad, Backward backward) {
    const bool track = record_grads_ && needs_grad;
    nodes_.push_back(Node{std::move(value), {}, nullptr, track ? std::move(backward) : Backward{}, track});
    return {this, nodes_.size() - 1};
  }

  const BasicTensor<T>& value(Var<T> v) const {
    const Node& n = nodes_.at(v.id);
    return n.param ? n.param->value : n.value;
  }

  bool needs_grad(Var<T> v) const { return v.valid() && nodes_.at(v.id).needs_grad; }

  /// Gradient flowing into `v` during backward; empty when nothing reached it.
  const BasicTensor<T>& grad(Var<T> v) const {
    const Node& n = nodes_.at(v.id);
    return n.param ? n.param->grad : n.grad;
  }

  /// Mutable gradient buffer of `v`, zero-initialised on first use.
  BasicTensor<T>& grad_buffer(Var<T> v) {
    Node& n = nodes_.at(v.id);
    if (n.param) return n.param->grad;
    if (n.grad.empty()) n.grad = BasicTensor<T>(value(v).shape());
    n.reached = true;
    return n.grad;
  }

  /// Populates gradients of every parameter on this tape with d(loss)/d(value).
  void backward(Var<T> loss) {
    if (!record_grads_) throw UsageError("backward: tape was created without gradient recording");
    if (consumed_) throw UsageError("backward: tape already consumed; run a new forward pass");
    if (!loss.valid() || loss.tape != this || loss.id >= nodes_.size()) {
      throw UsageError("backward: no recorded forward pass produced this loss");
    }
    if (value(loss).size() != 1) throw UsageError("backward: loss must be a scalar");
    consumed_ = true;
    for (auto& [p, id] : param_nodes_) p->zero_grad();
    if (!nodes_[loss.id].needs_grad) return;
    grad_buffer(loss).fill(T{1});
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.back && n.reached) n.back(*this);
    }
  }

 private:
  struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad;
    BasicParameter<T>* param = nullptr;
    Backward back;
    bool needs_grad = false;
    bool reached = false;
  };

  bool record_grads_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<BasicParameter<T>*, std::size_t> param_nodes_;
};

}  // namespace autosize::nn
