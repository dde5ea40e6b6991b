/*
Copyright 2026 The apose Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "apose/autodiff/tensor.hpp"

namespace apose::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

/// Dynamic reverse-mode graph. Nodes are appended in evaluation order; backward()
/// replays closures in reverse, adds leaf gradients into the bound parameters
/// (+=, so a parameter used twice receives the sum) and then frees the graph.
/// A tape is single threaded.
template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var out)>;

  Var constant(Tensor<Scalar> value) {
    nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
    return Var{nodes_.size() - 1};
  }

  /// Leaf bound to `param`. Tracks gradients only when param.requires_grad is set.
  Var watch(Tensor<Scalar>& param) {
    Node n{Tensor<Scalar>(param.shape, param.data), {}, param.requires_grad, {}, nullptr};
    if (param.requires_grad) n.param = &param;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  /// Appends an op result. The closure is kept only if some input is tracked.
  Var record(Tensor<Scalar> value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool tracks = false;
    for (Var v : inputs) tracks = tracks || (v.valid() && node(v).tracks);
    nodes_.push_back(Node{std::move(value), {}, tracks, tracks ? std::move(fn) : BackwardFn{}, nullptr});
    return Var{nodes_.size() - 1};
  }

  const Tensor<Scalar>& value(Var v) const { return node(v).value; }
  Shape shape(Var v) const { return node(v).value.shape; }
  bool tracks(Var v) const { return v.valid() && node(v).tracks; }
  Scalar item(Var v) const {
    if (value(v).size() != 1) throw std::invalid_argument("item: tensor is not a scalar");
    return value(v).data[0];
  }

  /// Gradient buffer of `v`, zero-initialized on first access.
  Vec<Scalar>& grad(Var v) {
    Node& n = node(v);
    if (n.grad.size() != n.value.size()) n.grad = Vec<Scalar>::Zero(n.value.size());
    return n.grad;
  }

  void backward(Var loss) {
    if (value(loss).size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    if (tracks(loss)) {
      grad(loss).setOnes();
      for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.tracks && n.backward && n.grad.size() > 0) n.backward(*this, Var{id});
      }
      for (Node& n : nodes_) {
        if (!n.param || n.grad.size() == 0) continue;
        if (!n.param->grad || n.param->grad->size() != n.param->size())
          n.param->grad = Vec<Scalar>::Zero(n.param->size());
        *n.param->grad += n.grad;
      }
    }
    clear();
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Scalar> value;
    Vec<Scalar> grad;
    bool tracks = false;
    BackwardFn backward;
    Tensor<Scalar>* param = nullptr;
  };

  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw std::out_of_range("tape: invalid variable");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("tape: invalid variable");
    return nodes_[v.id];
  }

  std::deque<Node> nodes_;
};

}  // namespace apose::ad
