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

#include "apose/acoustic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace apose {

void Scene::validate() const {
  auto inside = [this](const Eigen::Vector3d& p) {
    return (p.array() > 0.0).all() && (p.array() < room_dims.array()).all();
  };
  if (!(room_dims.array() > 0.0).all()) throw std::invalid_argument("scene: room dimensions must be positive");
  if (!inside(speaker_pos)) throw std::invalid_argument("scene: speaker outside the room");
  if (!inside(mic_pos)) throw std::invalid_argument("scene: microphone outside the room");
  if (!(wall_reflectance >= 0.0 && wall_reflectance <= 1.0))
    throw std::invalid_argument("scene: wall_reflectance must lie in [0, 1]");
  if (!(scatter_gain >= 0.0)) throw std::invalid_argument("scene: scatter_gain must be non-negative");
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("scene: speed_of_sound must be positive");
}

StandFrame stand_frame(const Scene& scene) {
  Eigen::Vector3d line = scene.mic_pos - scene.speaker_pos;
  line.z() = 0.0;
  if (line.norm() < 1e-9) throw std::invalid_argument("stand_frame: speaker and mic are vertically aligned");
  line.normalize();
  StandFrame f;
  const Eigen::Vector3d perp(-line.y(), line.x(), 0.0);
  f.origin = 0.5 * (scene.speaker_pos + scene.mic_pos);
  f.origin.z() = 0.0;
  f.up = Eigen::Vector3d::UnitZ();
  f.forward = -perp;
  f.left = -f.forward.cross(f.up);
  return f;
}

double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& q0,
                        const Eigen::Vector3d& q1) {
  // Closest points of two segments (Ericson, Real-Time Collision Detection 5.1.9).
  const Eigen::Vector3d d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  constexpr double eps = 1e-14;
  double s = 0.0, t = 0.0;
  if (a <= eps && e <= eps) return r.norm();
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2), denom = a * e - b * b;
      s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

int occluding_capsules(const Scene& scene, const PoseFrame& pose) {
  int count = 0;
  for (const auto& [i, j] : skeleton_bones()) {
    const Eigen::Vector3d a = pose.row(i).transpose(), b = pose.row(j).transpose();
    if (segment_distance(scene.speaker_pos, scene.mic_pos, a, b) <= scene.occlusion_radius) ++count;
  }
  return count;
}

double occlusion_gain(const Scene& scene, const std::optional<PoseFrame>& pose) {
  if (!pose) return 1.0;
  return std::exp(-scene.occlusion_sigma * occluding_capsules(scene, *pose));
}

std::vector<ScatterPath> enumerate_paths(const Scene& scene, const std::optional<PoseFrame>& pose) {
  const double c = scene.speed_of_sound;
  std::vector<ScatterPath> paths;
  paths.reserve(1 + kNumJoints + 6);

  auto arrival = [&scene](const Eigen::Vector3d& from) -> Eigen::Vector3d {
    return (from - scene.mic_pos).normalized();
  };

  const double direct = (scene.speaker_pos - scene.mic_pos).norm();
  paths.push_back({direct / c, occlusion_gain(scene, pose) / direct, arrival(scene.speaker_pos)});

  if (pose && scene.scatter_gain > 0.0) {
    for (int j = 0; j < kNumJoints; ++j) {
      const Eigen::Vector3d joint = pose->row(j).transpose();
      const double d_sj = (joint - scene.speaker_pos).norm();
      const double d_jm = (scene.mic_pos - joint).norm();
      paths.push_back({(d_sj + d_jm) / c, scene.scatter_gain / (d_sj * d_jm), arrival(joint)});
    }
  }

  if (scene.wall_reflectance > 0.0) {
    for (int axis = 0; axis < 3; ++axis) {
      for (const double wall : {0.0, scene.room_dims[axis]}) {
        Eigen::Vector3d image = scene.speaker_pos;
        image[axis] = 2.0 * wall - image[axis];
        const double d = (image - scene.mic_pos).norm();
        paths.push_back({d / c, scene.wall_reflectance / d, arrival(image)});
      }
    }
  }
  return paths;
}

void accumulate_path(const TspSignal& tsp, const ScatterPath& path, Eigen::Ref<BFormat> block) {
  const auto len = static_cast<std::ptrdiff_t>(block.rows());
  const double delay = path.delay * tsp.sample_rate;
  const auto lead = static_cast<std::ptrdiff_t>(std::floor(delay)) + 1;
  // Excitation history long enough that the delayed copy covers the whole block.
  std::vector<double> source(static_cast<std::size_t>(lead + len));
  for (std::ptrdiff_t i = 0; i < lead + len; ++i) source[static_cast<std::size_t>(i)] = tsp.periodic(i - lead);
  const std::vector<double> delayed = fractional_delay(source, delay);
  for (std::ptrdiff_t i = 0; i < len; ++i) {
    const double s = path.gain * delayed[static_cast<std::size_t>(lead + i)];
    block(i, 0) += s;
    block(i, 1) += s * path.arrival_dir.x();
    block(i, 2) += s * path.arrival_dir.y();
    block(i, 3) += s * path.arrival_dir.z();
  }
}

BFormat render_bformat(const Scene& scene, const TspSignal& tsp, const std::vector<PoseFrame>& poses,
                       std::optional<std::uint64_t> noise_seed, std::size_t frame_count) {
  scene.validate();
  if (!poses.empty() && frame_count != 0 && frame_count != poses.size())
    throw std::invalid_argument("render_bformat: pose count does not match the requested frame count");
  const std::size_t frames = poses.empty() ? frame_count : poses.size();
  const auto period = static_cast<Eigen::Index>(tsp.period_len);
  BFormat out = BFormat::Zero(static_cast<Eigen::Index>(frames) * period, 4);

  // The excitation is periodic and frames are period aligned, so one empty-room block serves all frames.
  std::optional<BFormat> empty_block;
  for (std::size_t t = 0; t < frames; ++t) {
    auto block = out.middleRows(static_cast<Eigen::Index>(t) * period, period);
    if (poses.empty()) {
      if (!empty_block) {
        empty_block = BFormat::Zero(period, 4);
        for (const ScatterPath& p : enumerate_paths(scene, std::nullopt)) accumulate_path(tsp, p, *empty_block);
      }
      block = *empty_block;
      continue;
    }
    for (const ScatterPath& p : enumerate_paths(scene, poses[t])) accumulate_path(tsp, p, block);
  }

  if (noise_seed) {
    const double sigma = std::sqrt(0.5) * std::pow(10.0, -scene.noise_snr_db / 20.0);
    std::mt19937_64 rng(*noise_seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index c = 0; c < 4; ++c) {
      for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, c) += noise(rng);
    }
  }
  return out;
}

}  // namespace apose
