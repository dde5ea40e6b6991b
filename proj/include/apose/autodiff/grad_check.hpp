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
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "apose/autodiff/tape.hpp"

namespace apose::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::size_t worst_param = 0;
  Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients of `loss_fn` with central differences.
/// `loss_fn(tape)` must build the scalar loss, binding `params` via tape.watch().
/// Every entry is checked unless there are more than `max_entries`, in which case a
/// seeded uniform subsample of that size is used. The relative error of one entry is
/// |a - n| / max(|a|, |n|, floor).
template <typename LossFn>
GradCheckResult grad_check(LossFn&& loss_fn, const std::vector<Tensor<double>*>& params, double h = 1e-5,
                           std::size_t max_entries = 10000, std::uint64_t seed = 0, double floor = 1e-8) {
  for (Tensor<double>* p : params) {
    p->requires_grad = true;
    p->zero_grad();
  }
  {
    Tape<double> tape;
    tape.backward(loss_fn(tape));
  }
  auto evaluate = [&]() {
    Tape<double> tape;
    return tape.item(loss_fn(tape));
  };

  std::vector<std::pair<std::size_t, Index>> entries;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (Index j = 0; j < params[i]->size(); ++j) entries.emplace_back(i, j);
  if (entries.size() > max_entries) {
    std::mt19937_64 rng(seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(max_entries);
  }

  GradCheckResult r;
  for (const auto& [i, j] : entries) {
    double& x = params[i]->data[j];
    const double saved = x;
    x = saved + h;
    const double up = evaluate();
    x = saved - h;
    const double down = evaluate();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = (*params[i]->grad)[j];
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    ++r.entries_checked;
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst_param = i;
      r.worst_index = j;
      r.worst_analytic = analytic;
      r.worst_numeric = numeric;
    }
  }
  return r;
}

}  // namespace apose::ad
