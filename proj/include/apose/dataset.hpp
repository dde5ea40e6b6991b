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
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "apose/audio_io.hpp"
#include "apose/autodiff/tensor.hpp"
#include "apose/features.hpp"
#include "apose/model.hpp"

namespace apose {

/// b x 7 features of one period, row-major (band-major) as stored on disk.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, kFeatureChannels, Eigen::RowMajor>;

/// Features and pose of one excitation period.
struct FrameRecord {
  FeatureMatrix feature;
  Pose<float> pose;
  float distance_cm = 0.0f;
  std::uint16_t subject_id = 0;

  bool operator==(const FrameRecord& o) const {
    return feature == o.feature && pose == o.pose && distance_cm == o.distance_cm && subject_id == o.subject_id;
  }
};

/// Consecutive frames of one session (or of one phase-shifted copy of it).
struct Recording {
  std::uint16_t subject_id = 0;
  float distance_cm = 0.0f;
  bool augmented = false;
  std::vector<FrameRecord> frames;
};

struct IngestConfig {
  std::size_t period_len = 600;
  FeatureConfig features;
};

/// One record per complete period. The WAV may exceed or fall short of the pose count
/// by at most one period; the shorter of the two sets the record count.
/// Throws FormatError for empty audio or a larger row/period mismatch.
Recording ingest(const BFormat& audio, const std::vector<PoseRow>& poses, const FeatureExtractor& extractor,
                 std::size_t period_len);

/// The original recording followed by one copy per alpha (a fraction of the period in
/// (0, 1)). A copy is framed round(alpha * period_len) samples late, and its target is
/// p_t + alpha (p_{t+1} - p_t). Each shift loses the final frame.
std::vector<Recording> augment_phase(const BFormat& audio, const std::vector<PoseRow>& poses,
                                     const std::vector<double>& alphas, const FeatureExtractor& extractor,
                                     std::size_t period_len);

/// A training window: frames [target_begin - k, target_begin + n) of `source`, targets
/// [target_begin, target_begin + n).
struct TrainSample {
  const Recording* source = nullptr;
  std::size_t target_begin = 0;
  SoftPositionLabel label;
};

/// Windows at target offsets k, k + n, k + 2n, ...; floor((len - k) / n) samples.
/// Throws std::invalid_argument when len < n + k.
std::vector<TrainSample> window(const Recording& recording, const WindowSpec& spec);

/// Per-entry standardization of the b x 7 features.
struct Normalizer {
  FeatureMatrix mean;
  FeatureMatrix inv_std;

  static Normalizer fit(const std::vector<const Recording*>& recordings);
};

/// Packs samples into model tensors (windows N x 7 x (n + k) x b, targets N x n x 63, labels N x 5).
template <typename Scalar>
Batch<Scalar> make_batch(const std::vector<TrainSample>& samples, const std::vector<std::size_t>& indices,
                         const WindowSpec& spec, const Normalizer& norm);

struct LosoSplit {
  std::vector<const Recording*> train;
  std::vector<const Recording*> test;
};

/// Test side: every non-augmented recording of `held_out`. Train side: every recording
/// of the other subjects, augmented copies included. Throws on unknown subjects.
LosoSplit split_loso(const std::vector<Recording>& recordings, std::uint16_t held_out);

struct DatasetHeader {
  std::uint32_t sample_rate = 16000;
  std::uint32_t period_len = 600;
  std::uint32_t bands = 64;
};

/// Binary dataset: magic "APOSEDS1", u32 sample_rate, u32 period_len, u32 b, u32 21,
/// u64 frame count, then per frame b*7 f32 features, 63 f32 pose, f32 distance_cm,
/// u16 subject_id, u16 0. Little-endian.
void serialize_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                       const std::vector<FrameRecord>& frames);

struct DatasetFile {
  DatasetHeader header;
  std::vector<FrameRecord> frames;
};

DatasetFile deserialize_dataset(const std::filesystem::path& path);

/// Splits a flat frame list into recordings at every change of subject or distance.
std::vector<Recording> group_recordings(const std::vector<FrameRecord>& frames);

std::vector<FrameRecord> flatten_recordings(const std::vector<Recording>& recordings);

/// Binary checkpoint: magic "APCHKPT1", u32 tensor count, then per tensor u16 name length,
/// name, u8 ndim, u32 dims, f32 data; a trailing u64 FNV-1a hash of all preceding bytes.
void serialize_checkpoint(const std::filesystem::path& path, const ad::ParamSet<float>& tensors);
ad::ParamSet<float> deserialize_checkpoint(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const unsigned char* data, std::size_t size, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace apose
