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

#include "apose/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace apose {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
// Peak joint speed allowed along any keyframe transition, m/s.
constexpr double kMaxJointSpeed = 1.8;

// Nominal segment lengths in meters.
constexpr double kThigh = 0.45;
constexpr double kShin = 0.43;
constexpr double kAnkleHeight = 0.08;
constexpr double kFootLength = 0.14;
constexpr double kHipHalfWidth = 0.09;
constexpr double kWaistUp = 0.10;
constexpr double kSpineUp = 0.30;
constexpr double kNeckUp = 0.55;
constexpr double kHeadUp = 0.72;
constexpr double kShoulderDrop = 0.04;
constexpr double kShoulderHalfWidth = 0.18;
constexpr double kUpperArm = 0.30;
constexpr double kForearm = 0.26;
constexpr double kHand = 0.08;

Articulation make(double torso, double abd, double flex, double elbow, double hip, double knee) {
  Articulation a;
  a.torso_pitch = torso * kDeg;
  a.shoulder_abduction = {abd * kDeg, abd * kDeg};
  a.shoulder_flexion = {flex * kDeg, flex * kDeg};
  a.elbow_flexion = {elbow * kDeg, elbow * kDeg};
  a.hip_flexion = {hip * kDeg, hip * kDeg};
  a.knee_flexion = {knee * kDeg, knee * kDeg};
  return a;
}

Articulation walk_step(int lead) {
  Articulation a = make(3, 6, 0, 15, 0, 0);
  const int trail = 1 - lead;
  a.hip_flexion[lead] = 20 * kDeg;
  a.hip_flexion[trail] = -12 * kDeg;
  a.knee_flexion[lead] = 8 * kDeg;
  a.knee_flexion[trail] = 25 * kDeg;
  a.shoulder_flexion[lead] = -18 * kDeg;
  a.shoulder_flexion[trail] = 18 * kDeg;
  return a;
}

struct Motion {
  std::vector<Articulation> keys;
  double hold;        // seconds each keyframe is held
  double transition;  // seconds between keyframes
};

const std::map<std::string, Motion>& motion_table() {
  static const std::map<std::string, Motion> table = {
      {"standing", {{make(0, 5, 0, 5, 0, 0)}, 1.5, 1.0}},
      {"t_pose", {{make(0, 90, 0, 0, 0, 0)}, 1.5, 1.4}},
      {"squatting", {{make(35, 5, 80, 10, 95, 110), make(0, 5, 0, 5, 0, 0)}, 0.6, 1.4}},
      {"bowing", {{make(60, 5, 60, 5, 0, 0), make(0, 5, 0, 5, 0, 0)}, 0.6, 1.3}},
      {"walking", {{walk_step(0), walk_step(1), walk_step(0), walk_step(1), walk_step(0), walk_step(1)}, 0.0, 0.6}},
  };
  return table;
}

}  // namespace

const std::array<const char*, kNumJoints>& joint_names() {
  static const std::array<const char*, kNumJoints> names = {
      "head",         "neck",          "left_shoulder", "right_shoulder", "left_arm",
      "right_arm",    "left_forearm",  "right_forearm", "left_hand",      "right_hand",
      "waist",        "left_thigh",    "right_thigh",   "left_shin",      "right_shin",
      "left_foot",    "right_foot",    "left_toe",      "right_toe",      "hip",
      "spine"};
  return names;
}

const std::vector<std::pair<int, int>>& skeleton_bones() {
  static const std::vector<std::pair<int, int>> bones = {
      {kHead, kNeck},           {kNeck, kSpine},              {kSpine, kWaist},
      {kWaist, kHip},           {kNeck, kLeftShoulder},       {kNeck, kRightShoulder},
      {kLeftShoulder, kLeftArm}, {kLeftArm, kLeftForearm},    {kLeftForearm, kLeftHand},
      {kRightShoulder, kRightArm}, {kRightArm, kRightForearm}, {kRightForearm, kRightHand},
      {kHip, kLeftThigh},       {kHip, kRightThigh},          {kLeftThigh, kLeftShin},
      {kLeftShin, kLeftFoot},   {kLeftFoot, kLeftToe},        {kRightThigh, kRightShin},
      {kRightShin, kRightFoot}, {kRightFoot, kRightToe}};
  return bones;
}

BodyShape BodyShape::from_seed(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eedb0d1ULL);
  std::uniform_real_distribution<double> scale(0.9, 1.1);
  BodyShape b;
  b.torso_scale = scale(rng);
  b.arm_scale = scale(rng);
  b.leg_scale = scale(rng);
  return b;
}

Eigen::Matrix<double, Articulation::kDims, 1> Articulation::to_vector() const {
  Eigen::Matrix<double, kDims, 1> v;
  v << torso_pitch, shoulder_abduction[0], shoulder_abduction[1], shoulder_flexion[0],
      shoulder_flexion[1], elbow_flexion[0], elbow_flexion[1], hip_flexion[0], hip_flexion[1],
      knee_flexion[0], knee_flexion[1];
  return v;
}

Articulation Articulation::from_vector(const Eigen::Matrix<double, kDims, 1>& v) {
  Articulation a;
  a.torso_pitch = v[0];
  a.shoulder_abduction = {v[1], v[2]};
  a.shoulder_flexion = {v[3], v[4]};
  a.elbow_flexion = {v[5], v[6]};
  a.hip_flexion = {v[7], v[8]};
  a.knee_flexion = {v[9], v[10]};
  return a;
}

PoseFrame pose_from_articulation(const Articulation& a, const BodyShape& body, const StandFrame& frame) {
  const Eigen::Vector3d& F = frame.forward;
  const Eigen::Vector3d& L = frame.left;
  const Eigen::Vector3d& U = frame.up;
  const double ts = body.torso_scale, as = body.arm_scale, ls = body.leg_scale;
  const std::array<double, 2> side = {1.0, -1.0};

  // Legs relative to the hip center.
  std::array<Eigen::Vector3d, 2> hip_joint, knee, ankle, toe;
  double reach = 0.0, fore_aft = 0.0;
  for (int s = 0; s < 2; ++s) {
    const double phi = a.hip_flexion[s];
    const double psi = phi - a.knee_flexion[s];
    const Eigen::Vector3d thigh_dir = -std::cos(phi) * U + std::sin(phi) * F;
    const Eigen::Vector3d shin_dir = -std::cos(psi) * U + std::sin(psi) * F;
    hip_joint[s] = side[s] * kHipHalfWidth * ts * L;
    knee[s] = hip_joint[s] + kThigh * ls * thigh_dir;
    ankle[s] = knee[s] + kShin * ls * shin_dir;
    toe[s] = ankle[s] + kFootLength * ls * F - 0.5 * kAnkleHeight * U;
    reach = std::max(reach, -ankle[s].dot(U));
    fore_aft += 0.5 * ankle[s].dot(F);
  }
  const Eigen::Vector3d hip = frame.origin + (reach + kAnkleHeight) * U - fore_aft * F;

  PoseFrame p;
  auto put = [&p](int j, const Eigen::Vector3d& v) { p.row(j) = v.transpose(); };
  put(kHip, hip);
  for (int s = 0; s < 2; ++s) {
    put(s == 0 ? kLeftThigh : kRightThigh, hip + hip_joint[s]);
    put(s == 0 ? kLeftShin : kRightShin, hip + knee[s]);
    put(s == 0 ? kLeftFoot : kRightFoot, hip + ankle[s]);
    put(s == 0 ? kLeftToe : kRightToe, hip + toe[s]);
  }

  // Upper body pitched about the hip center.
  const double th = a.torso_pitch;
  const Eigen::Vector3d up_t = std::cos(th) * U + std::sin(th) * F;
  const Eigen::Vector3d fwd_t = std::cos(th) * F - std::sin(th) * U;
  const Eigen::Vector3d neck = hip + kNeckUp * ts * up_t;
  put(kWaist, hip + kWaistUp * ts * up_t);
  put(kSpine, hip + kSpineUp * ts * up_t);
  put(kNeck, neck);
  put(kHead, hip + kHeadUp * ts * up_t);

  for (int s = 0; s < 2; ++s) {
    const Eigen::Vector3d shoulder = neck - kShoulderDrop * ts * up_t + side[s] * kShoulderHalfWidth * ts * L;
    const double abd = a.shoulder_abduction[s], flex = a.shoulder_flexion[s];
    const Eigen::Vector3d d0 = -std::cos(abd) * up_t + std::sin(abd) * side[s] * L;
    const Eigen::Vector3d upper = std::cos(flex) * d0 + std::sin(flex) * fwd_t;
    // The elbow bends along the flexion direction, which stays continuous through every pose.
    const Eigen::Vector3d bend = -std::sin(flex) * d0 + std::cos(flex) * fwd_t;
    const double e = a.elbow_flexion[s];
    const Eigen::Vector3d lower = std::cos(e) * upper + std::sin(e) * bend;
    const Eigen::Vector3d elbow = shoulder + kUpperArm * as * upper;
    const Eigen::Vector3d wrist = elbow + kForearm * as * lower;
    put(s == 0 ? kLeftShoulder : kRightShoulder, shoulder);
    put(s == 0 ? kLeftArm : kRightArm, elbow);
    put(s == 0 ? kLeftForearm : kRightForearm, wrist);
    put(s == 0 ? kLeftHand : kRightHand, wrist + kHand * as * lower);
  }
  return p;
}

const std::vector<std::string>& motion_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, motion] : motion_table()) out.push_back(name);
    return out;
  }();
  return names;
}

std::vector<Articulation> motion_keyframes(const std::string& motion) {
  const auto it = motion_table().find(motion);
  if (it == motion_table().end()) throw std::invalid_argument("unknown motion: " + motion);
  return it->second.keys;
}

namespace {

// Shortest transition keeping every joint under kMaxJointSpeed. The eased parameter moves
// at most 1.5x its mean rate, so the bound is 1.5 * (path length per unit parameter) / speed.
double min_transition(const Eigen::Matrix<double, Articulation::kDims, 1>& from,
                      const Eigen::Matrix<double, Articulation::kDims, 1>& to, const BodyShape& body) {
  constexpr int kSamples = 32;
  const StandFrame frame;
  PoseFrame prev = pose_from_articulation(Articulation::from_vector(from), body, frame);
  double rate = 0.0;
  for (int i = 1; i <= kSamples; ++i) {
    const double v = static_cast<double>(i) / kSamples;
    const PoseFrame cur = pose_from_articulation(Articulation::from_vector(from + v * (to - from)), body, frame);
    rate = std::max(rate, (cur - prev).rowwise().norm().maxCoeff() * kSamples);
    prev = cur;
  }
  return 1.5 * rate / kMaxJointSpeed;
}

}  // namespace

std::vector<PoseFrame> pose_sequencer(const std::vector<std::string>& script, double fps,
                                      double stand_distance_cm, double duration, std::uint64_t seed,
                                      const SequencerOptions& options) {
  if (!(fps > 0.0)) throw std::invalid_argument("pose_sequencer: fps must be positive");
  if (!(duration >= 0.0)) throw std::invalid_argument("pose_sequencer: negative duration");
  if (!(stand_distance_cm >= 0.0 && stand_distance_cm <= 100.0))
    throw std::invalid_argument("pose_sequencer: stand distance must lie in [0, 100] cm");
  if (script.empty()) throw std::invalid_argument("pose_sequencer: empty script");
  for (const auto& name : script) {
    if (!motion_table().count(name)) throw std::invalid_argument("unknown motion: " + name);
  }

  using Vec = Eigen::Matrix<double, Articulation::kDims, 1>;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Knots (time, articulation); each keyframe contributes an arrival and a departure knot.
  std::vector<double> times;
  std::vector<Vec> knots;
  double t = 0.0;
  for (std::size_t m = 0; t <= duration; m = (m + 1) % script.size()) {
    const Motion& motion = motion_table().at(script[m]);
    for (const Articulation& key : motion.keys) {
      Vec v = key.to_vector();
      for (int i = 0; i < v.size(); ++i) v[i] = v[i] * (1.0 + options.jitter * unit(rng)) + 2.0 * kDeg * unit(rng);
      if (!knots.empty()) {
        const double nominal = motion.transition * (1.0 + 0.2 * unit(rng));
        t += std::max(nominal, min_transition(knots.back(), v, options.body));
      }
      times.push_back(t);
      knots.push_back(v);
      const double hold = motion.hold * (1.0 + 0.5 * unit(rng));
      if (hold > 0.0) {
        t += hold;
        times.push_back(t);
        knots.push_back(v);
      }
    }
  }

  StandFrame stand = options.stand;
  stand.origin -= 0.01 * stand_distance_cm * stand.forward;

  const auto frames = static_cast<std::size_t>(std::floor(duration * fps + 1e-9));
  std::vector<PoseFrame> poses;
  poses.reserve(frames);
  std::size_t seg = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const double tf = static_cast<double>(f) / fps;
    while (seg + 2 < times.size() && times[seg + 1] <= tf) ++seg;
    const double span = times[seg + 1] - times[seg];
    const double u = span > 0.0 ? std::clamp((tf - times[seg]) / span, 0.0, 1.0) : 1.0;
    const double ease = u * u * (3.0 - 2.0 * u);
    const Vec v = knots[seg] + ease * (knots[seg + 1] - knots[seg]);
    poses.push_back(pose_from_articulation(Articulation::from_vector(v), options.body, stand));
  }
  return poses;
}

}  // namespace apose
