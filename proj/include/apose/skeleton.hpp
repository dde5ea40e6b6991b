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

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace apose {

inline constexpr int kNumJoints = 21;

/// Joint order used by every pose tensor, CSV and dataset file.
enum Joint : int {
  kHead = 0,
  kNeck,
  kLeftShoulder,
  kRightShoulder,
  kLeftArm,  // elbow
  kRightArm,
  kLeftForearm,  // wrist
  kRightForearm,
  kLeftHand,
  kRightHand,
  kWaist,
  kLeftThigh,  // hip joint
  kRightThigh,
  kLeftShin,  // knee
  kRightShin,
  kLeftFoot,  // ankle
  kRightFoot,
  kLeftToe,
  kRightToe,
  kHip,
  kSpine,
};

const std::array<const char*, kNumJoints>& joint_names();

/// Connected joint pairs; each one is a body capsule for occlusion and a stick in plots.
const std::vector<std::pair<int, int>>& skeleton_bones();

template <typename Scalar>
using Pose = Eigen::Matrix<Scalar, kNumJoints, 3, Eigen::RowMajor>;

/// 21 joints x (x, y, z) in meters, room frame.
using PoseFrame = Pose<double>;

/// Per-subject segment scaling.
struct BodyShape {
  double torso_scale = 1.0;
  double arm_scale = 1.0;
  double leg_scale = 1.0;

  /// Seeded draw with every scale in [0.9, 1.1].
  static BodyShape from_seed(std::uint64_t seed);
};

/// Where the subject stands: floor origin plus body axes (unit vectors).
struct StandFrame {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d forward = -Eigen::Vector3d::UnitY();
  Eigen::Vector3d left = Eigen::Vector3d::UnitX();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
};

/// Joint angles in radians. Index 0 is the left side, 1 the right side.
struct Articulation {
  double torso_pitch = 0.0;
  std::array<double, 2> shoulder_abduction{};
  std::array<double, 2> shoulder_flexion{};
  std::array<double, 2> elbow_flexion{};
  std::array<double, 2> hip_flexion{};
  std::array<double, 2> knee_flexion{};

  static constexpr int kDims = 11;
  Eigen::Matrix<double, kDims, 1> to_vector() const;
  static Articulation from_vector(const Eigen::Matrix<double, kDims, 1>& v);
};

/// Forward kinematics; the lower foot rests on the floor.
PoseFrame pose_from_articulation(const Articulation& a, const BodyShape& body, const StandFrame& frame);

/// Named motions understood by the sequencer.
const std::vector<std::string>& motion_names();

/// Keyframes of one motion (before any per-seed jitter). Throws on unknown names.
std::vector<Articulation> motion_keyframes(const std::string& motion);

struct SequencerOptions {
  BodyShape body;
  StandFrame stand;
  double jitter = 0.15;  // relative angle jitter per keyframe
};

/// Smooth trajectories through the keyframes of `script` (cycled until `duration`).
/// Consecutive keyframes are joined with cubic ease (zero velocity at each knot).
/// The stand frame origin is moved `stand_distance_cm` along -forward, i.e. away
/// from the speaker-mic line. Frame count is floor(duration * fps).
std::vector<PoseFrame> pose_sequencer(const std::vector<std::string>& script, double fps,
                                      double stand_distance_cm, double duration, std::uint64_t seed,
                                      const SequencerOptions& options = {});

}  // namespace apose
