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

#include "apose/model.hpp"

namespace apose {

double pose_loss_value(const Tensor<double>& pred, const Tensor<double>& gt) {
  Tape<double> t;
  return t.item(pose_loss(t, t.constant(pred), t.constant(gt)));
}

double smooth_loss_value(const Tensor<double>& pred, const Tensor<double>& gt) {
  Tape<double> t;
  return t.item(smooth_loss(t, t.constant(pred), t.constant(gt)));
}

double std_loss_value(const Tensor<double>& probs) {
  Tape<double> t;
  return t.item(std_loss(t, t.constant(probs)));
}

double total_loss_value(double pose, double smooth, double stdl, const LossWeights& w) {
  return w.w_alpha * pose + w.w_beta * smooth + w.w_gamma * stdl;
}

double discriminator_ce(const std::array<double, kNumAnchors>& probs, const SoftPositionLabel& target) {
  double ce = 0.0;
  for (int i = 0; i < kNumAnchors; ++i) ce -= target.probs[i] * std::log(std::max(probs[i], 1e-12));
  return ce;
}

}  // namespace apose
