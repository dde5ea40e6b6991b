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

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "apose/dataset.hpp"
#include "apose/errors.hpp"
#include "apose/trainer.hpp"

using namespace apose;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "apose_tests";
  fs::create_directories(dir);
  return dir / name;
}

RunConfig short_config(double seconds) {
  RunConfig c;
  c.duration = seconds;
  c.threads = 1;
  return c;
}

Recording synthetic_recording(std::size_t len, std::uint16_t subject, float distance, bool augmented = false) {
  Recording r{subject, distance, augmented, {}};
  std::mt19937 rng(subject * 100 + static_cast<unsigned>(distance));
  std::normal_distribution<float> d;
  for (std::size_t t = 0; t < len; ++t) {
    FrameRecord f{FeatureMatrix(8, 7), Pose<float>(), distance, subject};
    for (Eigen::Index i = 0; i < f.feature.size(); ++i) f.feature.data()[i] = d(rng);
    f.pose.setConstant(static_cast<float>(t));
    r.frames.push_back(f);
  }
  return r;
}

void corrupt_first_byte(const fs::path& p) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(0);
  f.put('X');
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("ten seconds of audio yield 266 records") {
    const RunConfig cfg = short_config(10.0);
    const Session s = synthesize_session(cfg, 1, 25.0);
    CHECK(s.audio.rows() == 266 * 600);
    CHECK(s.poses.size() == 266);
    const FeatureExtractor fx(cfg.features());
    const Recording r = ingest(s.audio, s.poses, fx, 600);
    CHECK(r.frames.size() == static_cast<std::size_t>(16000 * 10 / 600));
    CHECK(r.subject_id == 1);
    CHECK(r.distance_cm == 25.0f);
    CHECK(r.frames[5].pose == s.poses[5].pose.cast<float>());
    CHECK(r.frames[5].feature.rows() == 64);
  }

  TEST_CASE("ingest rejects empty or mismatched input") {
    const RunConfig cfg = short_config(1.0);
    const Session s = synthesize_session(cfg, 2, 0.0);
    const FeatureExtractor fx(cfg.features());
    CHECK_THROWS_AS(ingest(BFormat(0, 4), s.poses, fx, 600), FormatError);
    CHECK_THROWS_AS(ingest(s.audio, {}, fx, 600), FormatError);
    std::vector<PoseRow> fewer(s.poses.begin(), s.poses.end() - 3);
    CHECK_THROWS_AS(ingest(s.audio, fewer, fx, 600), FormatError);
    std::vector<PoseRow> one_less(s.poses.begin(), s.poses.end() - 1);
    CHECK(ingest(s.audio, one_less, fx, 600).frames.size() == one_less.size());
  }

  TEST_CASE("phase augmentation triples the frames minus edges") {
    const RunConfig cfg = short_config(4.0);
    const Session s = synthesize_session(cfg, 1, 50.0);
    const FeatureExtractor fx(cfg.features());
    const auto recs = augment_phase(s.audio, s.poses, {1.0 / 3.0, 2.0 / 3.0}, fx, 600);
    REQUIRE(recs.size() == 3);
    const std::size_t base = recs[0].frames.size();
    std::size_t total = 0;
    for (const auto& r : recs) total += r.frames.size();
    CHECK(total <= 3 * base);
    CHECK(total >= 3 * base - 2 * 2);
    CHECK_FALSE(recs[0].augmented);
    CHECK(recs[1].augmented);
    CHECK(recs[2].augmented);
    // Shifted targets interpolate neighbouring poses.
    const Pose<float> expect = (s.poses[4].pose + (s.poses[5].pose - s.poses[4].pose) / 3.0).cast<float>();
    CHECK((recs[1].frames[4].pose - expect).cwiseAbs().maxCoeff() < 1e-6f);
    // The shifted copy equals features framed at a 200-sample offset.
    const auto direct = fx.frames(s.audio, 600, 200);
    CHECK(recs[1].frames[7].feature == direct[7].assembled().cast<float>());
  }

  TEST_CASE("empty alpha set returns the original exactly") {
    const RunConfig cfg = short_config(2.0);
    const Session s = synthesize_session(cfg, 1, 0.0);
    const FeatureExtractor fx(cfg.features());
    const auto recs = augment_phase(s.audio, s.poses, {}, fx, 600);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].frames == ingest(s.audio, s.poses, fx, 600).frames);
    CHECK_THROWS_AS(augment_phase(s.audio, s.poses, {1.0}, fx, 600), std::invalid_argument);
    CHECK_THROWS_AS(augment_phase(s.audio, s.poses, {0.0}, fx, 600), std::invalid_argument);
  }

  TEST_CASE("static poses stay static under augmentation") {
    const RunConfig cfg = short_config(2.0);
    Session s = synthesize_session(cfg, 1, 0.0);
    for (auto& row : s.poses) row.pose = s.poses[0].pose;
    const FeatureExtractor fx(cfg.features());
    const auto recs = augment_phase(s.audio, s.poses, {1.0 / 3.0, 2.0 / 3.0}, fx, 600);
    for (const auto& r : recs)
      for (const auto& f : r.frames) CHECK(f.pose == s.poses[0].pose.cast<float>());
  }

  TEST_CASE("window counts follow the stride rule") {
    const Recording r24 = synthetic_recording(24, 1, 0), r40 = synthetic_recording(40, 1, 0);
    CHECK(window(r24, {8, 16}).size() == 1);
    CHECK(window(r40, {8, 16}).size() == 3);
    CHECK(window(r24, {8, 0}).size() == 3);
    CHECK_THROWS_AS(window(synthetic_recording(23, 1, 0), {8, 16}), std::invalid_argument);
    for (std::size_t len = 24; len < 120; ++len) {
      const Recording r = synthetic_recording(len, 1, 0);
      std::size_t brute = 0;
      for (std::size_t s = 16; s + 8 <= len; s += 8) ++brute;
      const auto ws = window(r, {8, 16});
      CHECK(ws.size() == brute);
      for (std::size_t i = 0; i < ws.size(); ++i) CHECK(ws[i].target_begin == 16 + 8 * i);
    }
  }

  TEST_CASE("batches align inputs and targets with the windowing contract") {
    const Recording r = synthetic_recording(56, 2, 37.5f);
    const WindowSpec spec{8, 16};
    const auto samples = window(r, spec);
    REQUIRE(samples.size() == 5);
    Normalizer norm;
    norm.mean = FeatureMatrix::Zero(8, 7);
    norm.inv_std = FeatureMatrix::Ones(8, 7);
    const Batch<float> b = make_batch<float>(samples, {3, 1}, spec, norm);
    CHECK(b.windows.shape == Shape{2, 7, 24, 8});
    CHECK(b.targets.shape == Shape{2, 8, 63});
    CHECK(b.labels.shape == Shape{2, 5});
    // Sample 3: frames [24, 48), targets [40, 48).
    for (int i = 0; i < 8; ++i) CHECK(b.targets.data[i * 63] == float(3 * 8 + 16 + i));
    for (int tt = 0; tt < 24; ++tt)
      for (int c = 0; c < 7; ++c)
        for (int band = 0; band < 8; ++band)
          REQUIRE(b.windows.data[((0 * 7 + c) * 24 + tt) * 8 + band] == r.frames[24 + tt].feature(band, c));
    CHECK(b.labels.data[1] == doctest::Approx(0.5));
    CHECK(b.labels.data[2] == doctest::Approx(0.5));
  }

  TEST_CASE("normalizer standardizes training features") {
    const Recording a = synthetic_recording(50, 1, 0), b = synthetic_recording(70, 2, 0);
    const Normalizer n = Normalizer::fit({&a, &b});
    Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(8, 7), sq = sum;
    for (const Recording* r : {&a, &b})
      for (const auto& f : r->frames) {
        const Eigen::ArrayXXd z = ((f.feature - n.mean).cwiseProduct(n.inv_std)).cast<double>().array();
        sum += z;
        sq += z.square();
      }
    CHECK((sum / 120).abs().maxCoeff() < 1e-4);
    CHECK(((sq / 120) - 1.0).abs().maxCoeff() < 1e-3);
  }

  TEST_CASE("leave-one-subject-out split") {
    std::vector<Recording> recs;
    for (std::uint16_t s = 1; s <= 5; ++s) {
      recs.push_back(synthetic_recording(30, s, 0));
      recs.push_back(synthetic_recording(30, s, 0, true));
    }
    const LosoSplit split = split_loso(recs, 3);
    std::set<int> train_subjects;
    for (const Recording* r : split.train) train_subjects.insert(r->subject_id);
    CHECK(train_subjects == std::set<int>{1, 2, 4, 5});
    CHECK(split.train.size() == 8);
    REQUIRE(split.test.size() == 1);
    CHECK(split.test[0]->subject_id == 3);
    CHECK_FALSE(split.test[0]->augmented);
    CHECK_THROWS_AS(split_loso(recs, 9), std::invalid_argument);
  }

  TEST_CASE("dataset files round trip bit-exactly") {
    const Recording a = synthetic_recording(20, 1, 25), b = synthetic_recording(15, 2, 75);
    const auto frames = flatten_recordings({a, b});
    const fs::path p = scratch("rt.apds");
    serialize_dataset(p, {16000, 600, 8}, frames);
    const DatasetFile back = deserialize_dataset(p);
    CHECK(back.header.bands == 8);
    CHECK(back.frames == frames);
    const auto groups = group_recordings(back.frames);
    REQUIRE(groups.size() == 2);
    CHECK(groups[1].frames == b.frames);
    corrupt_first_byte(p);
    CHECK_THROWS_AS(deserialize_dataset(p), FormatError);
  }

  TEST_CASE("truncated dataset files are rejected") {
    const fs::path p = scratch("trunc.apds");
    serialize_dataset(p, {16000, 600, 8}, synthetic_recording(5, 1, 0).frames);
    fs::resize_file(p, fs::file_size(p) - 3);
    CHECK_THROWS_AS(deserialize_dataset(p), FormatError);
  }

  TEST_CASE("checkpoints round trip and detect corruption") {
    TrainedModel m({8, 16}, 64, {}, 4);
    const fs::path p = scratch("m.apck");
    save_model(p, m);
    const TrainedModel back = load_model(p);
    CHECK(back.estimator.params().checksum() == m.estimator.params().checksum());
    CHECK(back.discriminator.params().checksum() == m.discriminator.params().checksum());
    CHECK(back.estimator.window().k == 16);
    const auto bytes = fs::file_size(p);
    {
      std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(static_cast<std::streamoff>(bytes / 2));
      f.put('\x7f');
    }
    CHECK_THROWS_AS(load_model(p), FormatError);
    save_model(p, m);
    corrupt_first_byte(p);
    CHECK_THROWS_AS(deserialize_checkpoint(p), FormatError);
    CHECK_THROWS_AS(load_model(scratch("missing.apck")), std::runtime_error);
  }

  TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a(nullptr, 0) == 0xcbf29ce484222325ULL);
    const unsigned char a[] = {'a'};
    CHECK(fnv1a(a, 1) == 0xaf63dc4c8601ec8cULL);
  }
}
