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

#include "apose/audio_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "apose/errors.hpp"

namespace apose {
namespace {

constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t off) {
  if (off + sizeof(T) > buf.size()) throw FormatError("wav: truncated header");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

}  // namespace

void write_bformat_wav(const std::filesystem::path& path, const BFormat& audio, std::uint32_t sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  const auto frames = static_cast<std::uint32_t>(audio.rows());
  const std::uint32_t data_bytes = frames * 4u * 4u;
  os.write("RIFF", 4);
  put<std::uint32_t>(os, 4 + (8 + 16) + (8 + 4) + (8 + data_bytes));
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put<std::uint32_t>(os, 16);
  put<std::uint16_t>(os, kFormatFloat);
  put<std::uint16_t>(os, 4);
  put<std::uint32_t>(os, sample_rate);
  put<std::uint32_t>(os, sample_rate * 16u);
  put<std::uint16_t>(os, 16);
  put<std::uint16_t>(os, 32);
  os.write("fact", 4);
  put<std::uint32_t>(os, 4);
  put<std::uint32_t>(os, frames);
  os.write("data", 4);
  put<std::uint32_t>(os, data_bytes);
  std::vector<float> interleaved(static_cast<std::size_t>(frames) * 4);
  for (std::uint32_t i = 0; i < frames; ++i)
    for (int c = 0; c < 4; ++c) interleaved[i * 4 + c] = static_cast<float>(audio(i, c));
  os.write(reinterpret_cast<const char*>(interleaved.data()),
           static_cast<std::streamsize>(interleaved.size() * sizeof(float)));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

WavData read_bformat_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open wav: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError("wav: missing RIFF/WAVE header");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t off = 12;
  while (off + 8 <= buf.size()) {
    const std::string id(buf.data() + off, 4);
    const auto size = get<std::uint32_t>(buf, off + 4);
    const std::size_t body = off + 8;
    if (id == "fmt ") {
      format = get<std::uint16_t>(buf, body);
      channels = get<std::uint16_t>(buf, body + 2);
      rate = get<std::uint32_t>(buf, body + 4);
      bits = get<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible) format = get<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      if (format != kFormatFloat || bits != 32) throw FormatError("wav: expected 32-bit float samples");
      if (channels != 4) throw FormatError("wav: expected 4 channels (W, X, Y, Z), got " + std::to_string(channels));
      if (body + size > buf.size()) throw FormatError("wav: truncated data chunk");
      const std::size_t frames = size / 16;
      WavData out;
      out.sample_rate = rate;
      out.audio.resize(static_cast<Eigen::Index>(frames), 4);
      for (std::size_t i = 0; i < frames; ++i) {
        for (int c = 0; c < 4; ++c) {
          float v;
          std::memcpy(&v, buf.data() + body + (i * 4 + c) * 4, 4);
          out.audio(static_cast<Eigen::Index>(i), c) = v;
        }
      }
      return out;
    }
    off = body + size + (size & 1u);
  }
  throw FormatError("wav: no data chunk");
}

void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "frame_idx,subject_id,distance_cm";
  for (int j = 0; j < kNumJoints; ++j) os << ",j" << j << "x,j" << j << "y,j" << j << "z";
  os << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const PoseRow& r : rows) {
    os << r.frame_idx << ',' << r.subject_id << ',' << r.distance_cm;
    for (int j = 0; j < kNumJoints; ++j)
      for (int a = 0; a < 3; ++a) os << ',' << r.pose(j, a);
    os << '\n';
  }
}

std::vector<PoseRow> read_pose_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open pose csv: " + path.string());
  std::vector<PoseRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("frame_idx", 0) == 0) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw FormatError("pose csv line " + std::to_string(lineno) + ": not a number: " + cell);
      }
    }
    if (fields.size() != 3 + 3 * kNumJoints)
      throw FormatError("pose csv line " + std::to_string(lineno) + ": expected 66 fields");
    PoseRow r;
    r.frame_idx = static_cast<std::uint64_t>(fields[0]);
    r.subject_id = static_cast<std::uint32_t>(fields[1]);
    r.distance_cm = fields[2];
    for (int j = 0; j < kNumJoints; ++j)
      for (int a = 0; a < 3; ++a) r.pose(j, a) = fields[3 + 3 * j + a];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace apose
