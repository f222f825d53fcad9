// Copyright 2026 The sparsekit Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "sparsekit/errors.hpp"
#include "sparsekit/tensor.hpp"

namespace sparsekit {

template <class T>
class Tape;

// Handle to a value recorded on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const BasicTensor<T>& value() const { return tape->value(*this); }
  const Shape& dims() const { return value().dims(); }
};

// Single-use reverse-mode tape. Nodes are appended in evaluation order, so a
// reverse sweep over the node list is a valid topological order.
//
// Parameter leaves reference the caller's tensors; those must outlive the
// tape and stay unmodified until backward() returns.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> param(BasicTensor<T>& p) {
    if (!p.all_finite()) throw NumericalError("non-finite parameter value");
    Node n;
    n.ref = &p;
    n.param = &p;
    n.requires_grad = true;
    return push(std::move(n));
  }

  Var<T> constant(BasicTensor<T> value) {
    if (!value.all_finite()) throw NumericalError("non-finite constant");
    Node n;
    n.owned = std::move(value);
    return push(std::move(n));
  }

  Var<T> constant_ref(const BasicTensor<T>& value) {
    if (!value.all_finite()) throw NumericalError("non-finite constant");
    Node n;
    n.ref = &value;
    return push(std::move(n));
  }

  // Records an op output. The backward rule is kept only when some input
  // needs a gradient. Throws NumericalError on non-finite output.
  Var<T> record(std::string_view op, BasicTensor<T> value,
                std::initializer_list<Var<T>> inputs, BackwardFn backward) {
    if (!value.all_finite()) {
      throw NumericalError("non-finite output from op '" + std::string(op) + "'");
    }
    Node n;
    n.owned = std::move(value);
    for (const Var<T>& in : inputs) {
      if (in.tape != this) throw ValidationError("op input recorded on a different tape");
      n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const BasicTensor<T>& value(Var<T> v) const { return value(v.id); }

  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node, allocated zeroed on first access.
  std::span<T> grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(value(id).size(), T{0});
    return n.grad;
  }
  std::span<T> grad(Var<T> v) { return grad(v.id); }

  const BasicTensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref != nullptr ? *n.ref : n.owned;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  // Fills every parameter's grad slot with d(loss)/d(param). Parameters are
  // zeroed first, so the result does not depend on prior grad contents.
  void backward(Var<T> loss) {
    if (consumed_) throw ValidationError("backward called twice on the same tape");
    if (loss.tape != this) throw ValidationError("loss recorded on a different tape");
    if (value(loss).size() != 1) {
      throw ValidationError("backward needs a scalar loss, got shape " +
                            shape_string(value(loss).dims()));
    }
    consumed_ = true;
    for (Node& n : nodes_) {
      if (n.param != nullptr) n.param->zero_grad();
    }
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss.id)[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, i);
      } else if (n.param != nullptr) {
        auto dst = n.param->grad();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
      }
    }
  }

 private:
  struct Node {
    BasicTensor<T> owned;
    const BasicTensor<T>* ref = nullptr;
    BasicTensor<T>* param = nullptr;
    std::vector<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var<T> push(Node n) {
    if (consumed_) throw ValidationError("tape already consumed by backward");
    nodes_.push_back(std::move(n));
    return Var<T>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace sparsekit
