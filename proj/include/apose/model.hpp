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
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "apose/autodiff.hpp"
#include "apose/errors.hpp"
#include "apose/skeleton.hpp"

namespace apose {

using ad::Index;
using ad::ParamSet;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

inline constexpr int kPoseDims = 3 * kNumJoints;
inline constexpr int kFeatureChannels = 7;
inline constexpr int kNumAnchors = 5;
inline constexpr std::array<double, kNumAnchors> kDistanceAnchorsCm{0.0, 25.0, 50.0, 75.0, 100.0};

/// n output poses from n + k input frames; the poses belong to the last n frames.
struct WindowSpec {
  int n = 8;
  int k = 16;

  int length() const { return n + k; }
  void validate() const {
    if (n < 1 || k < 0) throw std::invalid_argument("window spec: need n >= 1 and k >= 0");
  }
};

struct LossWeights {
  double w_alpha = 1.0;
  double w_beta = 10.0;
  double w_gamma = 1.0;
};

struct SoftPositionLabel {
  std::array<double, kNumAnchors> probs{};
};

/// Linear interpolation between the two anchors around `distance_cm`, clamped to [0, 100].
inline SoftPositionLabel soft_label(double distance_cm) {
  if (std::isnan(distance_cm)) throw std::invalid_argument("soft_label: distance is NaN");
  const double d = std::clamp(distance_cm, kDistanceAnchorsCm.front(), kDistanceAnchorsCm.back());
  SoftPositionLabel label;
  for (int i = 0; i + 1 < kNumAnchors; ++i) {
    const double lo = kDistanceAnchorsCm[i], hi = kDistanceAnchorsCm[i + 1];
    if (d <= hi) {
      const double u = (d - lo) / (hi - lo);
      label.probs[i] = 1.0 - u;
      label.probs[i + 1] = u;
      return label;
    }
  }
  label.probs.back() = 1.0;
  return label;
}

/// Index of the anchor nearest to `distance_cm`.
inline int nearest_anchor(double distance_cm) {
  int best = 0;
  for (int i = 1; i < kNumAnchors; ++i)
    if (std::abs(distance_cm - kDistanceAnchorsCm[i]) < std::abs(distance_cm - kDistanceAnchorsCm[best])) best = i;
  return best;
}

/// Layer widths. The mel axis is halved after the second and fourth 2-D layers,
/// so the band count must be divisible by 4.
struct ArchSpec {
  std::array<int, 4> conv2d_channels{32, 32, 64, 64};
  int temporal_channels = 128;
  int kernel1d = 5;
  double leaky_slope = 0.2;

  int tap_channels() const { return conv2d_channels.back(); }
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> random_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<Scalar> t(std::move(shape), true);
  for (Index i = 0; i < t.size(); ++i) t.data[i] = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
Var bind(Tape<Scalar>& tape, Tensor<Scalar>& p, bool track) {
  return track ? tape.watch(p) : tape.constant(Tensor<Scalar>(p.shape, p.data));
}

}  // namespace detail

/// Pose estimation module. Input N x 7 x (n + k) x bands, treated as a 7-channel
/// image over (time, mel). A 2-D conv stack is averaged over the mel axis to give a
/// per-frame feature sequence; its mean over time is the intermediate tap seen by the
/// discriminator. A temporal projection with kernel k + 1 maps n + k frames to n,
/// followed by 1-D convs and an output head emitting 63 values per frame.
template <typename Scalar>
class PoseEstimator {
 public:
  PoseEstimator(WindowSpec window, int bands, ArchSpec arch, std::uint64_t seed) : window_(window), bands_(bands), arch_(arch) {
    window_.validate();
    if (bands < 4 || bands % 4 != 0) throw std::invalid_argument("pose estimator: band count must be a multiple of 4");
    std::mt19937_64 rng(seed);
    int in = kFeatureChannels;
    for (int l = 0; l < 4; ++l) {
      const int out = arch_.conv2d_channels[l];
      params_.add(name("c2d", l, "w"), detail::random_tensor<Scalar>({out, in, 3, 3}, std::sqrt(2.0 / (in * 9)), rng));
      params_.add(name("c2d", l, "b"), Tensor<Scalar>({out}, true));
      in = out;
    }
    const int c = arch_.tap_channels(), h = arch_.temporal_channels, kl = arch_.kernel1d;
    const int span = window_.k + 1;
    params_.add("est.proj.w", detail::random_tensor<Scalar>({c, c, span}, std::sqrt(2.0 / (c * span)), rng));
    params_.add("est.proj.b", Tensor<Scalar>({c}, true));
    params_.add("est.t1.w", detail::random_tensor<Scalar>({h, c, kl}, std::sqrt(2.0 / (c * kl)), rng));
    params_.add("est.t1.b", Tensor<Scalar>({h}, true));
    params_.add("est.t2.w", detail::random_tensor<Scalar>({h, h, kl}, std::sqrt(2.0 / (h * kl)), rng));
    params_.add("est.t2.b", Tensor<Scalar>({h}, true));
    params_.add("est.head.w", detail::random_tensor<Scalar>({kPoseDims, h, kl}, 0.1 * std::sqrt(1.0 / (h * kl)), rng));
    params_.add("est.head.b", Tensor<Scalar>({kPoseDims}, true));
  }

  const WindowSpec& window() const { return window_; }
  int bands() const { return bands_; }
  const ArchSpec& arch() const { return arch_; }
  ParamSet<Scalar>& params() { return params_; }
  const ParamSet<Scalar>& params() const { return params_; }

  /// Output head bias, i.e. the pose emitted for an all-zero head input.
  void set_output_bias(const Eigen::Ref<const ad::Vec<Scalar>>& bias) {
    if (bias.size() != kPoseDims) throw std::invalid_argument("output bias must have 63 entries");
    params_.at("est.head.b").data = bias;
  }

  struct Encoding {
    Var frames;  // N x C x (n + k)
    Var tap;     // N x C
  };

  Encoding encode(Tape<Scalar>& t, Var x, bool track) {
    const Shape& s = t.shape(x);
    if (s.size() != 4 || s[1] != kFeatureChannels || s[3] != bands_)
      throw std::invalid_argument("pose estimator: expected N x 7 x T x " + std::to_string(bands_) + " input, got " +
                                  ad::to_string(s));
    if (s[2] != window_.length())
      throw std::invalid_argument("pose estimator: window length " + std::to_string(s[2]) + " != n + k = " +
                                  std::to_string(window_.length()));
    const auto slope = static_cast<Scalar>(arch_.leaky_slope);
    Var h = x;
    for (int l = 0; l < 4; ++l) {
      h = ad::conv2d(t, h, bind(t, name("c2d", l, "w"), track), bind(t, name("c2d", l, "b"), track),
                     ad::Conv2dOptions{1, 1, 1, 1});
      h = ad::leaky_relu(t, h, slope);
      if (l == 1 || l == 3) h = ad::avg_pool_last(t, h, 2);
    }
    const Var frames = ad::mean_last(t, h);
    return {frames, ad::mean_last(t, frames)};
  }

  struct Output {
    Var poses;  // N x n x 63
    Var tap;    // N x C
  };

  Output forward(Tape<Scalar>& t, Var x, bool track) {
    const Encoding e = encode(t, x, track);
    const auto slope = static_cast<Scalar>(arch_.leaky_slope);
    const Index pad = arch_.kernel1d / 2;
    Var h = ad::conv1d(t, e.frames, bind(t, "est.proj.w", track), bind(t, "est.proj.b", track));
    h = ad::leaky_relu(t, h, slope);
    h = ad::leaky_relu(t, ad::conv1d(t, h, bind(t, "est.t1.w", track), bind(t, "est.t1.b", track), 1, pad), slope);
    h = ad::leaky_relu(t, ad::conv1d(t, h, bind(t, "est.t2.w", track), bind(t, "est.t2.b", track), 1, pad), slope);
    h = ad::conv1d(t, h, bind(t, "est.head.w", track), bind(t, "est.head.b", track), 1, pad);
    return {ad::transpose12(t, h), e.tap};
  }

 private:
  static std::string name(const char* block, int layer, const char* kind) {
    return std::string("est.") + block + "." + std::to_string(layer) + "." + kind;
  }
  Var bind(Tape<Scalar>& t, const std::string& n, bool track) { return detail::bind(t, params_.at(n), track); }

  WindowSpec window_;
  int bands_;
  ArchSpec arch_;
  ParamSet<Scalar> params_;
};

/// Single fully connected layer from the intermediate tap to 5 anchor logits, then softmax.
template <typename Scalar>
class PositionDiscriminator {
 public:
  PositionDiscriminator(int in_features, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    params_.add("disc.fc.w", detail::random_tensor<Scalar>({in_features, kNumAnchors}, std::sqrt(1.0 / in_features), rng));
    params_.add("disc.fc.b", Tensor<Scalar>({kNumAnchors}, true));
  }

  ParamSet<Scalar>& params() { return params_; }
  const ParamSet<Scalar>& params() const { return params_; }

  /// N x 5 probabilities.
  Var forward(Tape<Scalar>& t, Var tap, bool track) {
    const Var logits = ad::linear(t, tap, detail::bind(t, params_.at("disc.fc.w"), track),
                                  detail::bind(t, params_.at("disc.fc.b"), track));
    return ad::softmax(t, logits);
  }

 private:
  ParamSet<Scalar> params_;
};

// ---- Loss terms -------------------------------------------------------------

/// Mean over frames of the Euclidean norm of the 63-value pose difference.
template <typename Scalar>
Var pose_loss(Tape<Scalar>& t, Var pred, Var gt) {
  if (t.shape(pred) != t.shape(gt)) throw std::invalid_argument("pose_loss: shape mismatch");
  if (t.shape(pred).empty() || t.shape(pred).back() != kPoseDims)
    throw std::invalid_argument("pose_loss: last axis must hold 63 values");
  return ad::mean(t, ad::row_norm(t, ad::sub(t, pred, gt)));
}

/// Mean over consecutive frame pairs of the norm of the velocity mismatch.
/// Accepts T x 63 or N x T x 63 (pairs never cross a window boundary).
template <typename Scalar>
Var smooth_loss(Tape<Scalar>& t, Var pred, Var gt) {
  if (t.shape(pred) != t.shape(gt)) throw std::invalid_argument("smooth_loss: shape mismatch");
  Var diff = ad::sub(t, pred, gt);
  Shape s = t.shape(diff);
  if (s.size() == 2) diff = ad::reshape(t, diff, Shape{1, s[0], s[1]});
  s = t.shape(diff);
  if (s.size() != 3 || s[2] != kPoseDims) throw std::invalid_argument("smooth_loss: expected [N x] T x 63");
  if (s[1] < 2) throw std::invalid_argument("smooth_loss: need at least two frames");
  return ad::mean(t, ad::row_norm(t, ad::time_diff(t, diff)));
}

/// Mean population standard deviation of the discriminator's probability rows.
template <typename Scalar>
Var std_loss(Tape<Scalar>& t, Var probs) {
  const Shape& s = t.shape(probs);
  if (s.empty() || s.back() != kNumAnchors) throw std::invalid_argument("std_loss: rows must hold 5 probabilities");
  const Index rows = t.value(probs).size() / kNumAnchors;
  for (Index r = 0; r < rows; ++r) {
    const double total = static_cast<double>(t.value(probs).data.segment(r * kNumAnchors, kNumAnchors).sum());
    if (std::abs(total - 1.0) > 1e-4) throw std::invalid_argument("std_loss: row does not sum to 1");
  }
  return ad::mean(t, ad::std_reduce(t, probs));
}

template <typename Scalar>
Var total_loss(Tape<Scalar>& t, Var pose, Var smooth, Var stdl, const LossWeights& w) {
  Var out = ad::scale(t, pose, static_cast<Scalar>(w.w_alpha));
  out = ad::add(t, out, ad::scale(t, smooth, static_cast<Scalar>(w.w_beta)));
  return ad::add(t, out, ad::scale(t, stdl, static_cast<Scalar>(w.w_gamma)));
}

// Plain-value helpers over double tensors.
double pose_loss_value(const Tensor<double>& pred, const Tensor<double>& gt);
double smooth_loss_value(const Tensor<double>& pred, const Tensor<double>& gt);
double std_loss_value(const Tensor<double>& probs);
double total_loss_value(double pose, double smooth, double stdl, const LossWeights& w);
/// -sum(target * log(max(p, 1e-12))).
double discriminator_ce(const std::array<double, kNumAnchors>& probs, const SoftPositionLabel& target);

// ---- Adversarial training step -----------------------------------------------

/// One batch: windows N x 7 x (n + k) x bands, targets N x n x 63, soft labels N x 5.
template <typename Scalar>
struct Batch {
  Tensor<Scalar> windows;
  Tensor<Scalar> targets;
  Tensor<Scalar> labels;
};

struct LossReport {
  std::int64_t step = 0;
  double l_pose = 0.0;
  double l_smooth = 0.0;
  double l_std = 0.0;
  double l_disc_ce = 0.0;
  double total = 0.0;
};

template <typename Scalar>
struct Optimizers {
  ad::AdamState<Scalar> estimator;
  ad::AdamState<Scalar> discriminator;
};

struct StepOptions {
  LossWeights weights;
  double clip_norm = 5.0;
};

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace detail

/// Discriminator update from a fixed tap (N x C): soft-label cross-entropy, clip, Adam.
template <typename Scalar>
double discriminator_update(PositionDiscriminator<Scalar>& disc, const Tensor<Scalar>& tap,
                            const Tensor<Scalar>& labels, ad::AdamState<Scalar>& opt, double clip_norm) {
  Tape<Scalar> t;
  const Var probs = disc.forward(t, t.constant(tap), true);
  const Var ce = ad::soft_cross_entropy(t, probs, labels);
  const double value = static_cast<double>(t.item(ce));
  detail::require_finite(value, "discriminator loss");
  disc.params().zero_grad();
  t.backward(ce);
  detail::require_finite(ad::clip_grad_norm(disc.params(), clip_norm), "discriminator gradient");
  ad::adam_step(disc.params(), opt);
  return value;
}

/// Phase A: the estimator runs untracked; only the discriminator is updated, on soft-label
/// cross-entropy. Returns the cross-entropy.
template <typename Scalar>
double discriminator_phase(PoseEstimator<Scalar>& est, PositionDiscriminator<Scalar>& disc, const Batch<Scalar>& batch,
                           ad::AdamState<Scalar>& opt, double clip_norm) {
  Tape<Scalar> t;
  const auto enc = est.encode(t, t.constant(batch.windows), false);
  return discriminator_update(disc, Tensor<Scalar>(t.shape(enc.tap), t.value(enc.tap).data), batch.labels, opt,
                              clip_norm);
}

/// Finishes phase B on a tape holding a tracked estimator forward pass.
template <typename Scalar>
LossReport estimator_update(Tape<Scalar>& t, const typename PoseEstimator<Scalar>::Output& out,
                            PoseEstimator<Scalar>& est, PositionDiscriminator<Scalar>& disc,
                            const Batch<Scalar>& batch, ad::AdamState<Scalar>& opt, const StepOptions& options) {
  const LossWeights& w = options.weights;
  const Var gt = t.constant(batch.targets);
  const Var lp = pose_loss(t, out.poses, gt);
  Var objective = ad::scale(t, lp, static_cast<Scalar>(w.w_alpha));

  LossReport r;
  r.l_pose = static_cast<double>(t.item(lp));
  if (est.window().n >= 2) {
    const Var ls = smooth_loss(t, out.poses, gt);
    r.l_smooth = static_cast<double>(t.item(ls));
    objective = ad::add(t, objective, ad::scale(t, ls, static_cast<Scalar>(w.w_beta)));
  }
  if (w.w_gamma != 0.0) {
    const Var ls = std_loss(t, disc.forward(t, out.tap, false));
    r.l_std = static_cast<double>(t.item(ls));
    objective = ad::add(t, objective, ad::scale(t, ls, static_cast<Scalar>(w.w_gamma)));
  } else {
    Tape<Scalar> side;
    const Var tap = side.constant(Tensor<Scalar>(t.shape(out.tap), t.value(out.tap).data));
    r.l_std = static_cast<double>(side.item(std_loss(side, disc.forward(side, tap, false))));
  }
  r.total = static_cast<double>(t.item(objective));
  detail::require_finite(r.total, "estimator loss");
  est.params().zero_grad();
  t.backward(objective);
  detail::require_finite(ad::clip_grad_norm(est.params(), options.clip_norm), "estimator gradient");
  ad::adam_step(est.params(), opt);
  return r;
}

/// Phase B: the discriminator is frozen (its output still carries gradient into the tap);
/// only the estimator is updated, on the weighted pose + smooth + std objective.
/// With w_gamma = 0 the discriminator is not part of the graph at all.
template <typename Scalar>
LossReport estimator_phase(PoseEstimator<Scalar>& est, PositionDiscriminator<Scalar>& disc, const Batch<Scalar>& batch,
                           ad::AdamState<Scalar>& opt, const StepOptions& options) {
  Tape<Scalar> t;
  const auto out = est.forward(t, t.constant(batch.windows), true);
  return estimator_update(t, out, est, disc, batch, opt, options);
}

/// Discriminator update followed by estimator update. The estimator is unchanged by
/// phase A, so both phases share one forward pass.
template <typename Scalar>
LossReport train_step(PoseEstimator<Scalar>& est, PositionDiscriminator<Scalar>& disc, const Batch<Scalar>& batch,
                      Optimizers<Scalar>& opt, const StepOptions& options) {
  Tape<Scalar> t;
  const auto out = est.forward(t, t.constant(batch.windows), true);
  const double ce = discriminator_update(disc, Tensor<Scalar>(t.shape(out.tap), t.value(out.tap).data),
                                         batch.labels, opt.discriminator, options.clip_norm);
  LossReport r = estimator_update(t, out, est, disc, batch, opt.estimator, options);
  r.l_disc_ce = ce;
  r.step = opt.estimator.t;
  return r;
}

}  // namespace apose
