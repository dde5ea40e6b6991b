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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "apose/autodiff/tensor.hpp"

namespace apose::ad {

template <typename Scalar>
struct AdamState {
  std::vector<Vec<Scalar>> m;
  std::vector<Vec<Scalar>> v;
  std::int64_t t = 0;
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

/// One bias-corrected Adam update of every tensor in `params` from its grad.
/// Tensors without a gradient are treated as having a zero gradient.
template <typename Scalar>
void adam_step(ParamSet<Scalar>& params, AdamState<Scalar>& st) {
  if (st.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      st.m.push_back(Vec<Scalar>::Zero(params[i].size()));
      st.v.push_back(Vec<Scalar>::Zero(params[i].size()));
    }
  }
  if (st.m.size() != params.size()) throw std::invalid_argument("adam: state does not match parameter count");
  ++st.t;
  const Scalar c1 = Scalar(1) - std::pow(st.beta1, static_cast<Scalar>(st.t));
  const Scalar c2 = Scalar(1) - std::pow(st.beta2, static_cast<Scalar>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Scalar>& p = params[i];
    if (st.m[i].size() != p.size()) throw std::invalid_argument("adam: state shape mismatch");
    if (!p.grad) continue;
    if (p.grad->size() != p.size()) throw std::invalid_argument("adam: gradient shape mismatch");
    const auto g = p.grad->array();
    st.m[i].array() = st.beta1 * st.m[i].array() + (Scalar(1) - st.beta1) * g;
    st.v[i].array() = st.beta2 * st.v[i].array() + (Scalar(1) - st.beta2) * g.square();
    p.data.array() -= st.lr * (st.m[i].array() / c1) / ((st.v[i].array() / c2).sqrt() + st.eps);
  }
}

/// Global L2 norm of all gradients.
template <typename Scalar>
double grad_norm(const ParamSet<Scalar>& params) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].grad) sq += params[i].grad->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

/// Rescales gradients so their global norm is at most `max_norm`; returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(ParamSet<Scalar>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const auto k = static_cast<Scalar>(max_norm / norm);
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].grad) *params[i].grad *= k;
  }
  return norm;
}

}  // namespace apose::ad
