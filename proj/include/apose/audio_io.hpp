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

#include "apose/acoustic_sim.hpp"
#include "apose/skeleton.hpp"

namespace apose {

/// 32-bit IEEE float WAV, channel order W, X, Y, Z.
void write_bformat_wav(const std::filesystem::path& path, const BFormat& audio, std::uint32_t sample_rate);

struct WavData {
  BFormat audio;
  std::uint32_t sample_rate = 0;
};

/// Accepts 32-bit float PCM (plain or WAVE_FORMAT_EXTENSIBLE). Throws FormatError on
/// anything else, including channel counts other than four.
WavData read_bformat_wav(const std::filesystem::path& path);

struct PoseRow {
  std::uint64_t frame_idx = 0;
  std::uint32_t subject_id = 0;
  double distance_cm = 0.0;
  PoseFrame pose;
};

/// `frame_idx, subject_id, distance_cm, j0x, j0y, j0z, ..., j20z` with a header line.
void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRow>& rows);
std::vector<PoseRow> read_pose_csv(const std::filesystem::path& path);

}  // namespace apose
