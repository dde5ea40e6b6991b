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

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "apose/signal.hpp"
#include "apose/skeleton.hpp"

namespace apose {

/// Four columns W, X, Y, Z; one row per sample.
using BFormat = Eigen::Matrix<double, Eigen::Dynamic, 4>;

/// Shoebox room with one speaker and one first-order ambisonic microphone.
/// The room spans [0, room_dims] on each axis.
struct Scene {
  Eigen::Vector3d room_dims{7.0, 9.0, 3.0};
  Eigen::Vector3d speaker_pos{2.0, 4.5, 1.1};
  Eigen::Vector3d mic_pos{5.0, 4.5, 1.1};
  double wall_reflectance = 0.5;
  double scatter_gain = 0.03;
  double occlusion_radius = 0.1;
  double occlusion_sigma = 2.0;
  /// Noise level relative to a full-scale sine arriving with unit path gain.
  double noise_snr_db = 20.0;
  double speed_of_sound = 343.0;

  /// Throws std::invalid_argument when speaker/mic are not strictly inside the room
  /// or the reflectance lies outside [0, 1].
  void validate() const;
};

/// The subject's on-line standing frame: floor point under the speaker-mic midpoint,
/// facing the line from the +perpendicular side.
StandFrame stand_frame(const Scene& scene);

struct ScatterPath {
  double delay = 0.0;  // seconds
  double gain = 0.0;
  Eigen::Vector3d arrival_dir = Eigen::Vector3d::UnitX();  // unit vector from mic toward the arrival
};

/// Shortest distance between segments [p0, p1] and [q0, q1].
double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& q0,
                        const Eigen::Vector3d& q1);

/// exp(-sigma * n) where n counts bone capsules crossing the speaker->mic segment.
/// An absent pose means an empty room.
double occlusion_gain(const Scene& scene, const std::optional<PoseFrame>& pose);
int occluding_capsules(const Scene& scene, const PoseFrame& pose);

/// Direct path, then one scatter path per joint (skipped when scatter_gain is 0),
/// then the six first-order wall images (skipped when wall_reflectance is 0).
std::vector<ScatterPath> enumerate_paths(const Scene& scene, const std::optional<PoseFrame>& pose);

/// Renders one TSP period per pose frame: every path adds a delayed, scaled copy of
/// the continuously repeating excitation, encoded as W += g s, (X, Y, Z) += g s dir.
/// With `poses` empty the room is rendered empty for `frame_count` periods; otherwise
/// a non-zero `frame_count` must equal poses.size(). White Gaussian noise is drawn
/// from `noise_seed`; std::nullopt renders noiselessly.
BFormat render_bformat(const Scene& scene, const TspSignal& tsp, const std::vector<PoseFrame>& poses,
                       std::optional<std::uint64_t> noise_seed, std::size_t frame_count = 0);

/// Adds the contribution of one path to a period-aligned output block.
void accumulate_path(const TspSignal& tsp, const ScatterPath& path, Eigen::Ref<BFormat> block);

}  // namespace apose
