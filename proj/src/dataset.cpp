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

#include "apose/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <stdexcept>
#include <string>

#include "apose/errors.hpp"
#include "apose/signal.hpp"

namespace apose {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

FrameRecord make_record(const FeatureFrame& f, const PoseFrame& pose, double distance_cm, std::uint32_t subject) {
  FrameRecord r;
  r.feature = f.assembled().cast<float>();
  r.pose = pose.cast<float>();
  r.distance_cm = static_cast<float>(distance_cm);
  r.subject_id = static_cast<std::uint16_t>(subject);
  return r;
}

void check_session(const BFormat& audio, const std::vector<PoseRow>& poses, std::size_t period_len) {
  if (period_len == 0) throw std::invalid_argument("period length must be positive");
  if (audio.rows() == 0) throw FormatError("empty audio");
  if (poses.empty()) throw FormatError("empty pose table");
  const auto periods = static_cast<std::size_t>(audio.rows()) / period_len;
  const std::size_t rows = poses.size();
  if ((periods > rows ? periods - rows : rows - periods) > 1)
    throw FormatError("audio holds " + std::to_string(periods) + " periods but pose table has " +
                      std::to_string(rows) + " rows");
  for (const auto& p : poses) {
    if (p.subject_id != poses.front().subject_id || p.distance_cm != poses.front().distance_cm)
      throw FormatError("pose table mixes sessions");
    if (p.subject_id > 0xFFFF) throw FormatError("subject id exceeds 16 bits");
  }
  if (!(poses.front().distance_cm >= 0.0)) throw FormatError("distance must be non-negative");
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(const T& v) {
    bytes(&v, sizeof(T));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    hash_ = fnv1a(c, n, hash_);
    out_.write(reinterpret_cast<const char*>(c), static_cast<std::streamsize>(n));
  }
  std::uint64_t hash() const { return hash_; }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed");
  }

 private:
  std::ofstream out_;
  std::uint64_t hash_ = 14695981039346656037ULL;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    buf_.assign(std::istreambuf_iterator<char>(in), {});
  }
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* p, std::size_t n) {
    if (n > buf_.size() - pos_) throw FormatError("truncated file");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(const char (&magic)[9]) {
    char got[8];
    if (buf_.size() < 8) throw FormatError("file too short for magic");
    bytes(got, 8);
    if (std::memcmp(got, magic, 8) != 0) throw FormatError(std::string("bad magic, expected ") + magic);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }
  const unsigned char* data() const { return reinterpret_cast<const unsigned char*>(buf_.data()); }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(const unsigned char* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

Recording ingest(const BFormat& audio, const std::vector<PoseRow>& poses, const FeatureExtractor& extractor,
                 std::size_t period_len) {
  check_session(audio, poses, period_len);
  const auto feats = extractor.frames(audio, period_len);
  const std::size_t count = std::min(feats.size(), poses.size());
  Recording rec;
  rec.subject_id = static_cast<std::uint16_t>(poses.front().subject_id);
  rec.distance_cm = static_cast<float>(poses.front().distance_cm);
  rec.frames.reserve(count);
  for (std::size_t t = 0; t < count; ++t)
    rec.frames.push_back(make_record(feats[t], poses[t].pose, poses[t].distance_cm, poses[t].subject_id));
  return rec;
}

std::vector<Recording> augment_phase(const BFormat& audio, const std::vector<PoseRow>& poses,
                                     const std::vector<double>& alphas, const FeatureExtractor& extractor,
                                     std::size_t period_len) {
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("augmentation fraction must lie in (0, 1)");
  std::vector<Recording> out{ingest(audio, poses, extractor, period_len)};
  const std::size_t base = out.front().frames.size();
  for (double a : alphas) {
    const auto offset = static_cast<std::size_t>(std::lround(a * static_cast<double>(period_len)));
    if (static_cast<std::size_t>(audio.rows()) < offset + period_len) continue;
    BFormat shifted(audio.rows() - static_cast<Eigen::Index>(offset), 4);
    for (int c = 0; c < 4; ++c) {
      const Eigen::VectorXd channel = audio.col(c);
      const auto s = phase_shift_stream(std::span<const double>(channel.data(), channel.size()), offset, period_len);
      shifted.col(c) = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    }
    const auto feats = extractor.frames(shifted, period_len);
    const std::size_t count = std::min({feats.size(), poses.size() - 1, base});
    Recording rec;
    rec.subject_id = out.front().subject_id;
    rec.distance_cm = out.front().distance_cm;
    rec.augmented = true;
    for (std::size_t t = 0; t < count; ++t) {
      const PoseFrame& p0 = poses[t].pose;
      const PoseFrame target = p0 + a * (poses[t + 1].pose - p0);
      rec.frames.push_back(make_record(feats[t], target, poses[t].distance_cm, poses[t].subject_id));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TrainSample> window(const Recording& recording, const WindowSpec& spec) {
  spec.validate();
  const auto len = recording.frames.size();
  const auto n = static_cast<std::size_t>(spec.n), k = static_cast<std::size_t>(spec.k);
  if (len < n + k)
    throw std::invalid_argument("recording of " + std::to_string(len) + " frames is shorter than n + k = " +
                                std::to_string(n + k));
  const SoftPositionLabel label = soft_label(recording.distance_cm);
  std::vector<TrainSample> out;
  for (std::size_t start = k; start + n <= len; start += n) out.push_back({&recording, start, label});
  return out;
}

Normalizer Normalizer::fit(const std::vector<const Recording*>& recordings) {
  Eigen::Index bands = -1;
  Eigen::MatrixXd sum, sq;
  double count = 0.0;
  for (const auto* r : recordings)
    for (const auto& f : r->frames) {
      if (bands < 0) {
        bands = f.feature.rows();
        sum = sq = Eigen::MatrixXd::Zero(bands, kFeatureChannels);
      }
      if (f.feature.rows() != bands) throw std::invalid_argument("normalizer: inconsistent band count");
      const Eigen::MatrixXd x = f.feature.cast<double>();
      sum += x;
      sq += x.cwiseProduct(x);
      count += 1.0;
    }
  if (count == 0.0) throw std::invalid_argument("normalizer: no frames");
  const Eigen::MatrixXd mean = sum / count;
  const Eigen::MatrixXd var = (sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0);
  Normalizer n;
  n.mean = mean.cast<float>();
  n.inv_std = var.cwiseSqrt().cwiseMax(1e-6).cwiseInverse().cast<float>();
  return n;
}

template <typename Scalar>
Batch<Scalar> make_batch(const std::vector<TrainSample>& samples, const std::vector<std::size_t>& indices,
                         const WindowSpec& spec, const Normalizer& norm) {
  const auto N = static_cast<Index>(indices.size());
  const Index T = spec.length(), n = spec.n, B = norm.mean.rows(), C = kFeatureChannels;
  Batch<Scalar> b{Tensor<Scalar>({N, C, T, B}), Tensor<Scalar>({N, n, kPoseDims}), Tensor<Scalar>({N, kNumAnchors})};
  for (Index i = 0; i < N; ++i) {
    const TrainSample& s = samples.at(indices[static_cast<std::size_t>(i)]);
    const auto& frames = s.source->frames;
    for (Index t = 0; t < T; ++t) {
      const FrameRecord& f = frames.at(s.target_begin - static_cast<std::size_t>(spec.k) + static_cast<std::size_t>(t));
      if (f.feature.rows() != B) throw std::invalid_argument("make_batch: band count differs from normalizer");
      const FeatureMatrix z = (f.feature - norm.mean).cwiseProduct(norm.inv_std);
      for (Index c = 0; c < C; ++c)
        for (Index m = 0; m < B; ++m) b.windows.data[((i * C + c) * T + t) * B + m] = static_cast<Scalar>(z(m, c));
    }
    for (Index t = 0; t < n; ++t) {
      const Pose<float>& p = frames.at(s.target_begin + static_cast<std::size_t>(t)).pose;
      for (Index d = 0; d < kPoseDims; ++d) b.targets.data[(i * n + t) * kPoseDims + d] = static_cast<Scalar>(p.data()[d]);
    }
    for (Index a = 0; a < kNumAnchors; ++a) b.labels.data[i * kNumAnchors + a] = static_cast<Scalar>(s.label.probs[a]);
  }
  return b;
}

template Batch<float> make_batch<float>(const std::vector<TrainSample>&, const std::vector<std::size_t>&,
                                        const WindowSpec&, const Normalizer&);
template Batch<double> make_batch<double>(const std::vector<TrainSample>&, const std::vector<std::size_t>&,
                                          const WindowSpec&, const Normalizer&);

LosoSplit split_loso(const std::vector<Recording>& recordings, std::uint16_t held_out) {
  LosoSplit split;
  bool found = false;
  for (const auto& r : recordings) {
    if (r.subject_id == held_out) {
      found = true;
      if (!r.augmented) split.test.push_back(&r);
    } else {
      split.train.push_back(&r);
    }
  }
  if (!found) throw std::invalid_argument("unknown subject " + std::to_string(held_out));
  return split;
}

void serialize_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                       const std::vector<FrameRecord>& frames) {
  for (const auto& f : frames)
    if (f.feature.rows() != static_cast<Eigen::Index>(header.bands))
      throw std::invalid_argument("frame band count differs from header");
  Writer w(path);
  w.bytes("APOSEDS1", 8);
  w.put(header.sample_rate);
  w.put(header.period_len);
  w.put(header.bands);
  w.put(static_cast<std::uint32_t>(kNumJoints));
  w.put(static_cast<std::uint64_t>(frames.size()));
  for (const auto& f : frames) {
    w.bytes(f.feature.data(), sizeof(float) * static_cast<std::size_t>(f.feature.size()));
    w.bytes(f.pose.data(), sizeof(float) * kPoseDims);
    w.put(f.distance_cm);
    w.put(f.subject_id);
    w.put(std::uint16_t{0});
  }
  w.finish();
}

DatasetFile deserialize_dataset(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("APOSEDS1");
  DatasetFile file;
  file.header.sample_rate = r.get<std::uint32_t>();
  file.header.period_len = r.get<std::uint32_t>();
  file.header.bands = r.get<std::uint32_t>();
  if (r.get<std::uint32_t>() != kNumJoints) throw FormatError("dataset joint count must be 21");
  const auto count = r.get<std::uint64_t>();
  const std::size_t per_frame = sizeof(float) * (file.header.bands * kFeatureChannels + kPoseDims + 1) + 4;
  if (file.header.bands == 0 || count > r.remaining() / per_frame || count * per_frame != r.remaining())
    throw FormatError("dataset size does not match header");
  file.frames.resize(count);
  for (auto& f : file.frames) {
    f.feature.resize(file.header.bands, kFeatureChannels);
    r.bytes(f.feature.data(), sizeof(float) * static_cast<std::size_t>(f.feature.size()));
    r.bytes(f.pose.data(), sizeof(float) * kPoseDims);
    f.distance_cm = r.get<float>();
    f.subject_id = r.get<std::uint16_t>();
    r.get<std::uint16_t>();
  }
  return file;
}

std::vector<Recording> group_recordings(const std::vector<FrameRecord>& frames) {
  std::vector<Recording> out;
  for (const auto& f : frames) {
    if (out.empty() || out.back().subject_id != f.subject_id || out.back().distance_cm != f.distance_cm) {
      out.emplace_back();
      out.back().subject_id = f.subject_id;
      out.back().distance_cm = f.distance_cm;
    }
    out.back().frames.push_back(f);
  }
  return out;
}

std::vector<FrameRecord> flatten_recordings(const std::vector<Recording>& recordings) {
  std::vector<FrameRecord> out;
  for (const auto& r : recordings) out.insert(out.end(), r.frames.begin(), r.frames.end());
  return out;
}

void serialize_checkpoint(const std::filesystem::path& path, const ad::ParamSet<float>& tensors) {
  Writer w(path);
  w.bytes("APCHKPT1", 8);
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string& name = tensors.names()[i];
    const auto& t = tensors[i];
    if (name.size() > 0xFFFF || t.shape.size() > 0xFF) throw std::invalid_argument("checkpoint entry too large: " + name);
    w.put(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) w.put(static_cast<std::uint32_t>(d));
    w.bytes(t.data.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
  }
  const std::uint64_t h = w.hash();
  w.put(h);
  w.finish();
}

ad::ParamSet<float> deserialize_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("APCHKPT1");
  const auto count = r.get<std::uint32_t>();
  ad::ParamSet<float> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.get<std::uint16_t>(), '\0');
    r.bytes(name.data(), name.size());
    const auto ndim = r.get<std::uint8_t>();
    ad::Shape shape(ndim);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      d = r.get<std::uint32_t>();
      total *= static_cast<std::uint64_t>(d);
      if (total > r.remaining() / sizeof(float)) throw FormatError("tensor " + name + " exceeds file size");
    }
    ad::Tensor<float> t(shape);
    r.bytes(t.data.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
    out.add(std::move(name), std::move(t));
  }
  const std::uint64_t expected = fnv1a(r.data(), r.pos());
  if (r.get<std::uint64_t>() != expected) throw FormatError("checkpoint hash mismatch");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint hash");
  return out;
}

}  // namespace apose
