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

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace apose::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

/// Dense row-major tensor. `grad`, when present, has exactly the shape of `data`.
template <typename Scalar>
struct Tensor {
  Shape shape;
  Vec<Scalar> data;
  bool requires_grad = false;
  std::optional<Vec<Scalar>> grad;

  Tensor() = default;
  explicit Tensor(Shape s, bool tracked = false)
      : shape(std::move(s)), data(Vec<Scalar>::Zero(numel(shape))), requires_grad(tracked) {}
  Tensor(Shape s, Vec<Scalar> values, bool tracked = false)
      : shape(std::move(s)), data(std::move(values)), requires_grad(tracked) {
    if (data.size() != numel(shape))
      throw std::invalid_argument("tensor: " + std::to_string(data.size()) + " values for shape " + to_string(shape));
  }

  Index size() const { return data.size(); }
  Index rank() const { return static_cast<Index>(shape.size()); }
  Index dim(std::size_t i) const { return shape.at(i); }

  void zero_grad() {
    if (requires_grad) grad = Vec<Scalar>::Zero(size());
    else grad.reset();
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> t(shape, data.template cast<Other>(), requires_grad);
    if (grad) t.grad = grad->template cast<Other>();
    return t;
  }
};

/// Named, insertion-ordered parameter tensors. References stay valid across add().
template <typename Scalar>
class ParamSet {
 public:
  Tensor<Scalar>& add(std::string name, Tensor<Scalar> tensor) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(tensor));
    return tensors_.back();
  }

  bool contains(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  Tensor<Scalar>& at(const std::string& name) { return tensors_[index_of(name)]; }
  const Tensor<Scalar>& at(const std::string& name) const { return tensors_[index_of(name)]; }

  std::size_t size() const { return tensors_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor<Scalar>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<Scalar>& operator[](std::size_t i) const { return tensors_[i]; }

  void zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
  }

  std::vector<Tensor<Scalar>*> pointers() {
    std::vector<Tensor<Scalar>*> out;
    for (auto& t : tensors_) out.push_back(&t);
    return out;
  }

  template <typename Other>
  ParamSet<Other> cast() const {
    ParamSet<Other> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<Other>());
    return out;
  }

  /// FNV-1a over every parameter's raw bytes.
  std::uint64_t checksum() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto& t : tensors_) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(t.data.data());
      for (std::size_t i = 0; i < static_cast<std::size_t>(t.size()) * sizeof(Scalar); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
      }
    }
    return h;
  }

 private:
  std::size_t index_of(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("no parameter named " + name);
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::vector<std::string> names_;
  std::deque<Tensor<Scalar>> tensors_;
};

}  // namespace apose::ad
