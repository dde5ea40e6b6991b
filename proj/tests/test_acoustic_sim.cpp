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

#include <doctest.h>

#include <cmath>
#include <random>

#include "apose/acoustic_sim.hpp"
#include "apose/skeleton.hpp"

using namespace apose;

namespace {

// Dense sampling of both segments; the minimum sampled distance upper-bounds the true one.
double sampled_segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& q0,
                                const Eigen::Vector3d& q1) {
  double best = 1e300;
  const int n = 400;
  for (int i = 0; i <= n; ++i) {
    const Eigen::Vector3d p = p0 + (p1 - p0) * (double(i) / n);
    for (int j = 0; j <= n; ++j) best = std::min(best, (p - (q0 + (q1 - q0) * (double(j) / n))).norm());
  }
  return best;
}

int brute_force_occluders(const Scene& scene, const PoseFrame& pose) {
  int count = 0;
  for (const auto& [a, b] : skeleton_bones()) {
    const Eigen::Vector3d pa = pose.row(a).transpose(), pb = pose.row(b).transpose();
    // Point-to-segment over a fine grid of the line is a separate oracle from the closed-form routine.
    double best = 1e300;
    const int n = 4000;
    for (int i = 0; i <= n; ++i) {
      const Eigen::Vector3d p = scene.speaker_pos + (scene.mic_pos - scene.speaker_pos) * (double(i) / n);
      const Eigen::Vector3d ab = pb - pa;
      const double t = std::clamp((p - pa).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      best = std::min(best, (p - (pa + t * ab)).norm());
    }
    if (best <= scene.occlusion_radius + 1e-6) ++count;
  }
  return count;
}

PoseFrame standing(const Scene& scene, double distance_cm) {
  return pose_sequencer({"standing"}, 26.67, distance_cm, 1.0, 3, {.body = {}, .stand = stand_frame(scene), .jitter = 0.0})
      .front();
}

}  // namespace

TEST_SUITE("acoustic_sim") {
  TEST_CASE("segment distance agrees with dense sampling") {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::Vector3d a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng)), c(u(rng), u(rng), u(rng)),
          d(u(rng), u(rng), u(rng));
      const double exact = segment_distance(a, b, c, d);
      const double sampled = sampled_segment_distance(a, b, c, d);
      CHECK(exact <= sampled + 1e-12);
      CHECK(sampled - exact < 0.02);
    }
  }

  TEST_CASE("no body or distant body leaves the direct path unoccluded") {
    const Scene scene;
    CHECK(occlusion_gain(scene, std::nullopt) == 1.0);
    CHECK(occlusion_gain(scene, standing(scene, 100.0)) == 1.0);
  }

  TEST_CASE("torso on the line with three crossing capsules") {
    Scene scene;
    const PoseFrame base = standing(scene, 0.0);
    // Slide the body vertically until the oracle sees exactly three crossing capsules.
    bool found = false;
    for (double lift = -1.0; lift <= 0.6 && !found; lift += 0.01) {
      PoseFrame pose = base;
      pose.col(2).array() += lift;
      if (brute_force_occluders(scene, pose) != 3) continue;
      found = true;
      CHECK(occluding_capsules(scene, pose) == 3);
      CHECK(occlusion_gain(scene, pose) == doctest::Approx(std::exp(-6.0)));
      CHECK(occlusion_gain(scene, pose) == doctest::Approx(0.0025).epsilon(0.01));
    }
    CHECK(found);
  }

  TEST_CASE("occlusion count matches the brute-force oracle on random placements") {
    Scene scene;
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> lift(-0.8, 0.4), dist(0.0, 40.0);
    for (int trial = 0; trial < 10; ++trial) {
      PoseFrame pose = standing(scene, dist(rng));
      pose.col(2).array() += lift(rng);
      CHECK(occluding_capsules(scene, pose) == brute_force_occluders(scene, pose));
    }
  }

  TEST_CASE("adding an intersecting capsule never increases occlusion gain") {
    Scene scene;
    PoseFrame pose = standing(scene, 100.0);
    const double before = occlusion_gain(scene, pose);
    // Drag the left hand onto the line: the forearm-hand capsule now crosses it.
    pose.row(kLeftHand) = (0.5 * (scene.speaker_pos + scene.mic_pos)).transpose();
    CHECK(occlusion_gain(scene, pose) <= before);
    CHECK(occlusion_gain(scene, pose) < 1.0);
  }

  TEST_CASE("empty room without reflections has only the direct path") {
    Scene scene;
    scene.scatter_gain = 0.0;
    scene.wall_reflectance = 0.0;
    scene.speaker_pos = {2.5, 4.5, 1.1};
    scene.mic_pos = {4.5, 4.5, 1.1};
    const auto paths = enumerate_paths(scene, standing(scene, 0.0));
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].delay == doctest::Approx(2.0 / 343.0));
    CHECK(paths[0].delay * 1000.0 == doctest::Approx(5.831).epsilon(1e-4));
  }

  TEST_CASE("path inventory and gains") {
    const Scene scene;
    const PoseFrame pose = standing(scene, 50.0);
    const auto paths = enumerate_paths(scene, pose);
    REQUIRE(paths.size() == 1 + kNumJoints + 6);
    const double direct = (scene.speaker_pos - scene.mic_pos).norm();
    CHECK(paths[0].gain == doctest::Approx(occlusion_gain(scene, pose) / direct));
    for (int j = 0; j < kNumJoints; ++j) {
      const ScatterPath& p = paths[1 + j];
      const Eigen::Vector3d joint = pose.row(j).transpose();
      const double dsj = (joint - scene.speaker_pos).norm(), djm = (joint - scene.mic_pos).norm();
      CHECK(p.gain == doctest::Approx(scene.scatter_gain / (dsj * djm)));
      CHECK(p.delay >= direct / scene.speed_of_sound);
    }
    for (const auto& p : paths) CHECK(std::abs(p.arrival_dir.norm() - 1.0) < 1e-9);
  }

  TEST_CASE("scatter delay is Lipschitz in joint position") {
    const Scene scene;
    PoseFrame pose = standing(scene, 25.0);
    const auto base = enumerate_paths(scene, pose);
    std::mt19937 rng(2);
    std::normal_distribution<double> n;
    const double eps = 1e-3;
    for (int j = 0; j < kNumJoints; ++j) {
      PoseFrame moved = pose;
      Eigen::Vector3d dir(n(rng), n(rng), n(rng));
      moved.row(j) += eps * dir.normalized().transpose();
      const auto after = enumerate_paths(scene, moved);
      CHECK(std::abs(after[1 + j].delay - base[1 + j].delay) <= 2 * eps / scene.speed_of_sound + 1e-15);
    }
  }

  TEST_CASE("mirror-symmetric scene pairs paths with opposite lateral arrival") {
    Scene scene;
    scene.speaker_pos = {3.5, 2.0, 1.1};
    scene.mic_pos = {3.5, 6.0, 1.1};
    scene.wall_reflectance = 0.0;
    // Speaker-mic line along y, so the mirror plane is x = 3.5 and mirroring flips x.
    PoseFrame pose = PoseFrame::Zero();
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.1, 0.5);
    for (int j = 0; j + 1 < kNumJoints; j += 2) {
      const double dx = u(rng), y = 3.0 + u(rng), z = 0.5 + u(rng);
      pose.row(j) << 3.5 + dx, y, z;
      pose.row(j + 1) << 3.5 - dx, y, z;
    }
    pose.row(kNumJoints - 1) << 3.5, 4.0, 1.5;
    const auto paths = enumerate_paths(scene, pose);
    for (int j = 0; j + 1 < kNumJoints; j += 2) {
      const auto& a = paths[1 + j];
      const auto& b = paths[2 + j];
      CHECK(a.delay == doctest::Approx(b.delay));
      CHECK(a.arrival_dir.x() == doctest::Approx(-b.arrival_dir.x()));
      CHECK(a.arrival_dir.y() == doctest::Approx(b.arrival_dir.y()));
    }
    CHECK(std::abs(paths[kNumJoints].arrival_dir.x()) < 1e-12);
  }

  TEST_CASE("single direct path along +x encodes X = W") {
    Scene scene;
    scene.scatter_gain = 0.0;
    scene.wall_reflectance = 0.0;
    scene.speaker_pos = {5.0, 4.5, 1.1};
    scene.mic_pos = {2.0, 4.5, 1.1};
    const TspSignal tsp = generate_tsp();
    const BFormat out = render_bformat(scene, tsp, {}, std::nullopt, 3);
    CHECK(out.rows() == 1800);
    CHECK(out.col(0).cwiseAbs().maxCoeff() > 0.1);
    CHECK((out.col(1) - out.col(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(out.col(2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(out.col(3).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("silent excitation renders pure noise at the configured level") {
    const Scene scene;
    TspSignal tsp = generate_tsp();
    std::fill(tsp.samples.begin(), tsp.samples.end(), 0.0);
    const BFormat out = render_bformat(scene, tsp, {}, 7ULL, 200);
    const double sigma = std::sqrt(0.5) * std::pow(10.0, -scene.noise_snr_db / 20.0);
    for (int c = 0; c < 4; ++c) {
      const double rms = std::sqrt(out.col(c).squaredNorm() / static_cast<double>(out.rows()));
      CHECK(rms == doctest::Approx(sigma).epsilon(0.02));
      CHECK(std::abs(out.col(c).mean()) < 5 * sigma / std::sqrt(double(out.rows())));
    }
  }

  TEST_CASE("render is linear in path gains") {
    Scene scene;
    const TspSignal tsp = generate_tsp();
    std::vector<PoseFrame> poses = pose_sequencer({"walking"}, tsp.frame_rate(), 25, 0.5, 4,
                                                  {.body = {}, .stand = stand_frame(scene), .jitter = 0.15});
    const BFormat a = render_bformat(scene, tsp, poses, std::nullopt);
    BFormat doubled = BFormat::Zero(a.rows(), 4);
    const auto period = static_cast<Eigen::Index>(tsp.period_len);
    for (std::size_t t = 0; t < poses.size(); ++t) {
      auto block = doubled.middleRows(static_cast<Eigen::Index>(t) * period, period);
      for (ScatterPath p : enumerate_paths(scene, poses[t])) {
        p.gain *= 2.0;
        accumulate_path(tsp, p, block);
      }
    }
    CHECK((doubled - 2.0 * a).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("render argument checks") {
    const Scene scene;
    const TspSignal tsp = generate_tsp();
    std::vector<PoseFrame> poses(3, standing(scene, 0.0));
    CHECK_THROWS_AS(render_bformat(scene, tsp, poses, std::nullopt, 4), std::invalid_argument);
    CHECK(render_bformat(scene, tsp, poses, std::nullopt, 3).rows() == 1800);
    Scene bad = scene;
    bad.mic_pos = {8.0, 1.0, 1.0};
    CHECK_THROWS_AS(render_bformat(bad, tsp, poses, std::nullopt), std::invalid_argument);
  }
}

TEST_SUITE("acoustic_sim") {
  TEST_CASE("standing for one second is static") {
    const auto seq = pose_sequencer({"standing"}, 26.67, 0.0, 1.0, 1);
    CHECK((seq.size() == 26 || seq.size() == 27));
    for (const auto& p : seq) CHECK((p - seq.front()).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("t-pose wrists sit at shoulder height about an arm length out") {
    const auto seq = pose_sequencer({"t_pose"}, 26.67, 0.0, 1.0, 1, {.body = {}, .stand = {}, .jitter = 0.0});
    const PoseFrame& p = seq.back();
    for (const auto& [shoulder, wrist, elbow] : {std::tuple{kLeftShoulder, kLeftForearm, kLeftArm},
                                                std::tuple{kRightShoulder, kRightForearm, kRightArm}}) {
      CHECK(std::abs(p(wrist, 2) - p(shoulder, 2)) < 0.05);
      const double arm = (p.row(elbow) - p.row(shoulder)).norm() + (p.row(wrist) - p.row(elbow)).norm();
      const double lateral = std::abs(p(wrist, 0) - p(shoulder, 0));
      CHECK(lateral == doctest::Approx(arm).epsilon(0.05));
    }
  }

  TEST_CASE("motion speed stays under a human plausibility cap") {
    const double fps = 16000.0 / 600.0;
    for (const auto& m : motion_names()) {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto seq = pose_sequencer({m}, fps, 50.0, 20.0, seed);
        double worst = 0;
        for (std::size_t t = 1; t < seq.size(); ++t)
          worst = std::max(worst, (seq[t] - seq[t - 1]).rowwise().norm().maxCoeff());
        CHECK_MESSAGE(worst <= 2.0 / fps, m);
      }
    }
    const auto mixed = pose_sequencer(motion_names(), fps, 0.0, 30.0, 9);
    for (std::size_t t = 1; t < mixed.size(); ++t)
      CHECK((mixed[t] - mixed[t - 1]).rowwise().norm().maxCoeff() <= 2.0 / fps);
  }

  TEST_CASE("stand distance translates perpendicular to the line") {
    const Scene scene;
    const SequencerOptions opt{.body = {}, .stand = stand_frame(scene), .jitter = 0.0};
    const auto near = pose_sequencer({"standing"}, 26.67, 0.0, 0.2, 1, opt);
    const auto far = pose_sequencer({"standing"}, 26.67, 100.0, 0.2, 1, opt);
    const Eigen::RowVector3d shift = far[0].row(kHip) - near[0].row(kHip);
    CHECK(shift.norm() == doctest::Approx(1.0));
    const Eigen::Vector3d line = scene.mic_pos - scene.speaker_pos;
    CHECK(std::abs(shift.dot(line.transpose())) < 1e-9);
  }

  TEST_CASE("unknown motion names are rejected") {
    CHECK_THROWS_AS(pose_sequencer({"moonwalk"}, 26.67, 0.0, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(motion_keyframes("moonwalk"), std::invalid_argument);
  }

  TEST_CASE("body shapes stay within ten percent") {
    for (std::uint64_t s = 0; s < 100; ++s) {
      const BodyShape b = BodyShape::from_seed(s);
      for (double v : {b.torso_scale, b.arm_scale, b.leg_scale}) {
        CHECK(v >= 0.9);
        CHECK(v <= 1.1);
      }
    }
  }
}
