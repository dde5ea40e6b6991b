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

#include "apose/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "apose/audio_io.hpp"
#include "apose/errors.hpp"

namespace apose {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

std::string session_stem(std::uint16_t subject, double distance_cm) {
  std::ostringstream s;
  s << "s" << subject << "_d" << std::lround(distance_cm);
  return s.str();
}

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Eigen::Matrix<float, kPoseDims, 1> flat(const PoseFrame& p) {
  return Eigen::Map<const Eigen::Matrix<double, kPoseDims, 1>>(p.data()).cast<float>();
}

}  // namespace

// ---- Synthetic corpus ---------------------------------------------------------

Session synthesize_session(const RunConfig& config, std::uint16_t subject, double distance_cm) {
  if (subject == 0) throw std::invalid_argument("subject ids start at 1");
  config.validate();
  const Scene scene = config.scene();
  const TspSignal tsp = config.tsp();
  std::vector<std::string> script = config.motions;
  std::rotate(script.begin(), script.begin() + static_cast<std::ptrdiff_t>((subject - 1) % script.size()), script.end());
  SequencerOptions opts;
  opts.body = BodyShape::from_seed(mix(config.seed, subject));
  opts.stand = stand_frame(scene);
  opts.jitter = config.jitter;
  const auto dist_key = static_cast<std::uint64_t>(std::llround(distance_cm * 1000.0));
  const auto poses = pose_sequencer(script, tsp.frame_rate(), distance_cm, config.duration,
                                    mix(config.seed, subject, dist_key), opts);
  Session s;
  s.subject_id = subject;
  s.distance_cm = distance_cm;
  s.audio = render_bformat(scene, tsp, poses, mix(config.seed, subject, dist_key + 0x5EED));
  s.poses.reserve(poses.size());
  for (std::size_t t = 0; t < poses.size(); ++t) s.poses.push_back({t, subject, distance_cm, poses[t]});
  return s;
}

BFormat synthesize_empty_room(const RunConfig& config) {
  const TspSignal tsp = config.tsp();
  const auto frames = static_cast<std::size_t>(std::floor(config.empty_duration * tsp.frame_rate() + 1e-9));
  if (frames == 0) throw std::invalid_argument("empty-room duration shorter than one period");
  return render_bformat(config.scene(), tsp, {}, mix(config.seed, 0, 0xE3), frames);
}

CorpusManifest synthesize_corpus(const RunConfig& config, const std::filesystem::path& dir) {
  config.validate();
  std::filesystem::create_directories(dir);
  const FeatureExtractor extractor(config.features());
  const auto sr = static_cast<std::uint32_t>(config.sample_rate);

  std::vector<std::pair<std::uint16_t, double>> keys;
  for (int s = 1; s <= config.subjects; ++s)
    for (double d : config.distances) keys.emplace_back(static_cast<std::uint16_t>(s), d);

  CorpusManifest manifest;
  manifest.sessions.resize(keys.size());
  std::vector<Recording> recordings(keys.size());
  parallel_for(keys.size(), config.threads, [&](std::size_t i) {
    const Session s = synthesize_session(config, keys[i].first, keys[i].second);
    const std::string stem = session_stem(s.subject_id, s.distance_cm);
    write_bformat_wav(dir / (stem + ".wav"), s.audio, sr);
    write_pose_csv(dir / (stem + ".csv"), s.poses);
    recordings[i] = ingest(s.audio, s.poses, extractor, config.period_len);
    manifest.sessions[i] = {s.subject_id, s.distance_cm, stem + ".wav", stem + ".csv", recordings[i].frames.size()};
  });

  const DatasetHeader header{sr, static_cast<std::uint32_t>(config.period_len), static_cast<std::uint32_t>(config.b)};
  serialize_dataset(dir / "dataset.apds", header, flatten_recordings(recordings));

  if (config.empty_duration > 0) {
    const BFormat empty = synthesize_empty_room(config);
    write_bformat_wav(dir / "empty_room.wav", empty, sr);
    std::vector<FrameRecord> frames;
    for (const auto& f : extractor.frames(empty, config.period_len)) {
      FrameRecord r;
      r.feature = f.assembled().cast<float>();
      r.pose.setZero();
      frames.push_back(std::move(r));
    }
    serialize_dataset(dir / "empty_room.apds", header, frames);
    manifest.empty_wav = "empty_room.wav";
  }

  std::ofstream m(dir / "manifest.csv");
  m << "subject_id,distance_cm,wav,csv,frames\n";
  for (const auto& s : manifest.sessions)
    m << s.subject_id << ',' << s.distance_cm << ',' << s.wav << ',' << s.csv << ',' << s.frames << '\n';
  if (!manifest.empty_wav.empty()) m << "0,0," << manifest.empty_wav << ",," << 0 << '\n';
  if (!m) throw std::runtime_error("cannot write manifest in " + dir.string());
  return manifest;
}

CorpusManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.csv");
  if (!in) throw std::runtime_error("no manifest.csv in " + dir.string());
  CorpusManifest manifest;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() == 4) cols.emplace_back();
    if (cols.size() != 5) throw FormatError("manifest: malformed line '" + line + "'");
    try {
      SessionEntry e{static_cast<std::uint16_t>(std::stoul(cols[0])), std::stod(cols[1]), cols[2], cols[3],
                     cols[4].empty() ? 0 : std::stoul(cols[4])};
      if (e.subject_id == 0) manifest.empty_wav = e.wav;
      else manifest.sessions.push_back(e);
    } catch (const std::logic_error&) {
      throw FormatError("manifest: malformed line '" + line + "'");
    }
  }
  return manifest;
}

std::vector<Session> load_sessions(const std::filesystem::path& dir, const CorpusManifest& manifest) {
  std::vector<Session> out;
  for (const auto& e : manifest.sessions) {
    Session s;
    s.subject_id = e.subject_id;
    s.distance_cm = e.distance_cm;
    s.audio = read_bformat_wav(dir / e.wav).audio;
    s.poses = read_pose_csv(dir / e.csv);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Recording> build_recordings(const RunConfig& config, const std::vector<Session>& sessions,
                                        std::uint16_t held_out) {
  const FeatureExtractor extractor(config.features());
  std::vector<std::vector<Recording>> parts(sessions.size());
  parallel_for(sessions.size(), config.threads, [&](std::size_t i) {
    const Session& s = sessions[i];
    const std::vector<double> none;
    parts[i] = augment_phase(s.audio, s.poses, s.subject_id == held_out ? none : config.alphas, extractor,
                             config.period_len);
  });
  std::vector<Recording> out;
  for (auto& p : parts)
    for (auto& r : p) out.push_back(std::move(r));
  return out;
}

// ---- Model bundle -------------------------------------------------------------

TrainedModel::TrainedModel(const WindowSpec& window, int bands, const ArchSpec& arch, std::uint64_t seed)
    : estimator(window, bands, arch, mix(seed, 10)), discriminator(arch.tap_channels(), mix(seed, 11)) {
  normalizer.mean = FeatureMatrix::Zero(bands, kFeatureChannels);
  normalizer.inv_std = FeatureMatrix::Ones(bands, kFeatureChannels);
}

ad::ParamSet<float> TrainedModel::checkpoint() const {
  ad::ParamSet<float> out;
  const auto meta = [&](const char* name, std::vector<float> v) {
    const auto size = static_cast<Index>(v.size());
    out.add(name, Tensor<float>({size}, Eigen::Map<const ad::Vec<float>>(v.data(), size)));
  };
  const WindowSpec& w = estimator.window();
  const ArchSpec& a = estimator.arch();
  meta("meta.window", {static_cast<float>(w.n), static_cast<float>(w.k)});
  meta("meta.bands", {static_cast<float>(estimator.bands())});
  meta("meta.arch", {static_cast<float>(a.conv2d_channels[0]), static_cast<float>(a.conv2d_channels[1]),
                     static_cast<float>(a.conv2d_channels[2]), static_cast<float>(a.conv2d_channels[3]),
                     static_cast<float>(a.temporal_channels), static_cast<float>(a.kernel1d),
                     static_cast<float>(a.leaky_slope)});
  const auto matrix = [&](const char* name, const FeatureMatrix& m) {
    out.add(name, Tensor<float>({m.rows(), m.cols()}, Eigen::Map<const ad::Vec<float>>(m.data(), m.size())));
  };
  matrix("norm.mean", normalizer.mean);
  matrix("norm.inv_std", normalizer.inv_std);
  for (const auto* set : {&estimator.params(), &discriminator.params()})
    for (std::size_t i = 0; i < set->size(); ++i) out.add(set->names()[i], Tensor<float>((*set)[i].shape, (*set)[i].data));
  return out;
}

TrainedModel TrainedModel::from_checkpoint(const ad::ParamSet<float>& t) {
  try {
    const auto& w = t.at("meta.window").data;
    const auto& a = t.at("meta.arch").data;
    if (w.size() != 2 || a.size() != 7 || t.at("meta.bands").size() != 1) throw FormatError("checkpoint: bad meta tensors");
    ArchSpec arch;
    for (int i = 0; i < 4; ++i) arch.conv2d_channels[static_cast<std::size_t>(i)] = static_cast<int>(a[i]);
    arch.temporal_channels = static_cast<int>(a[4]);
    arch.kernel1d = static_cast<int>(a[5]);
    arch.leaky_slope = a[6];
    const int bands = static_cast<int>(t.at("meta.bands").data[0]);
    TrainedModel m({static_cast<int>(w[0]), static_cast<int>(w[1])}, bands, arch, 0);
    for (auto* set : {&m.estimator.params(), &m.discriminator.params()})
      for (std::size_t i = 0; i < set->size(); ++i) {
        const auto& src = t.at(set->names()[i]);
        if (src.shape != (*set)[i].shape) throw FormatError("checkpoint: shape mismatch for " + set->names()[i]);
        (*set)[i].data = src.data;
      }
    const auto matrix = [&](const char* name, FeatureMatrix& dst) {
      const auto& src = t.at(name);
      if (src.shape != Shape{bands, kFeatureChannels}) throw FormatError(std::string("checkpoint: bad ") + name);
      dst = Eigen::Map<const FeatureMatrix>(src.data.data(), bands, kFeatureChannels);
    };
    matrix("norm.mean", m.normalizer.mean);
    matrix("norm.inv_std", m.normalizer.inv_std);
    return m;
  } catch (const std::out_of_range& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  serialize_checkpoint(path, model.checkpoint());
}

TrainedModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
  return TrainedModel::from_checkpoint(deserialize_checkpoint(path));
}

// ---- Training -----------------------------------------------------------------

PoseFrame mean_pose(const std::vector<const Recording*>& train) {
  PoseFrame sum = PoseFrame::Zero();
  std::size_t count = 0;
  for (const auto* r : train)
    for (const auto& f : r->frames) {
      sum += f.pose.cast<double>();
      ++count;
    }
  if (count == 0) throw std::invalid_argument("mean_pose: no frames");
  return sum / static_cast<double>(count);
}

Trainer::Trainer(const RunConfig& config, std::vector<const Recording*> train)
    : config_(config),
      window_(config.window()),
      train_(std::move(train)),
      model_(window_, static_cast<int>(config.b), ArchSpec{}, config.seed),
      rng_(mix(config.seed, 12)) {
  config_.validate();
  if (train_.empty()) throw std::invalid_argument("trainer: no training recordings");
  for (const auto* r : train_) {
    auto w = window(*r, window_);
    samples_.insert(samples_.end(), w.begin(), w.end());
  }
  model_.normalizer = Normalizer::fit(train_);
  model_.estimator.set_output_bias(flat(mean_pose(train_)));
  opt_.estimator.lr = static_cast<float>(config_.lr);
  opt_.discriminator.lr = static_cast<float>(config_.lr);
  order_.resize(samples_.size());
  reshuffle();
}

void Trainer::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order_[i - 1], order_[pick(rng_)]);
  }
  cursor_ = 0;
}

std::int64_t Trainer::steps_per_epoch() const {
  const auto b = static_cast<std::size_t>(config_.batch_size);
  return static_cast<std::int64_t>((samples_.size() + b - 1) / b);
}

std::int64_t Trainer::planned_steps() const {
  return config_.max_steps > 0 ? config_.max_steps : config_.epochs * steps_per_epoch();
}

LossReport Trainer::step() {
  if (cursor_ >= order_.size()) {
    reshuffle();
    ++epoch_;
  }
  const std::size_t end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(config_.batch_size));
  const std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                     order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  const Batch<float> batch = make_batch<float>(samples_, idx, window_, model_.normalizer);
  StepOptions options;
  options.weights = config_.weights();
  options.clip_norm = config_.clip_norm;
  return train_step(model_.estimator, model_.discriminator, batch, opt_, options);
}

std::vector<LossReport> Trainer::fit(const std::function<void(int)>& on_epoch) {
  std::vector<LossReport> reports;
  const std::int64_t total = planned_steps();
  for (std::int64_t s = 0; s < total; ++s) {
    reports.push_back(step());
    if (on_epoch && (cursor_ >= order_.size() || s + 1 == total)) on_epoch(epoch_ + 1);
  }
  return reports;
}

void write_loss_csv(std::ostream& out, const std::vector<LossReport>& reports) {
  out << "step,l_pose,l_smooth,l_std,l_disc_ce,total\n" << std::setprecision(9);
  for (const auto& r : reports)
    out << r.step << ',' << r.l_pose << ',' << r.l_smooth << ',' << r.l_std << ',' << r.l_disc_ce << ',' << r.total
        << '\n';
}

// ---- Inference and evaluation -------------------------------------------------

Prediction predict(TrainedModel& model, const std::vector<const Recording*>& recordings, int batch_size) {
  const WindowSpec& spec = model.estimator.window();
  std::vector<TrainSample> samples;
  for (const auto* r : recordings) {
    auto w = window(*r, spec);
    samples.insert(samples.end(), w.begin(), w.end());
  }
  Prediction p;
  for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(samples.size(), begin + static_cast<std::size_t>(batch_size)); ++i)
      idx.push_back(i);
    const Batch<float> batch = make_batch<float>(samples, idx, spec, model.normalizer);
    Tape<float> t;
    const auto out = model.estimator.forward(t, t.constant(batch.windows), false);
    const auto& values = t.value(out.poses).data;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const TrainSample& s = samples[idx[i]];
      for (int f = 0; f < spec.n; ++f) {
        const auto offset = static_cast<Index>((i * static_cast<std::size_t>(spec.n) + static_cast<std::size_t>(f)) *
                                               kPoseDims);
        PoseFrame pred;
        for (int d = 0; d < kPoseDims; ++d) pred.data()[d] = static_cast<double>(values[offset + d]);
        p.pred.push_back(pred);
        p.gt.push_back(s.source->frames[s.target_begin + static_cast<std::size_t>(f)].pose.cast<double>());
        p.distances_cm.push_back(s.source->distance_cm);
      }
    }
  }
  return p;
}

Prediction constant_prediction(const PoseFrame& pose, const std::vector<const Recording*>& test,
                               const WindowSpec& window_spec) {
  Prediction p;
  for (const auto* r : test)
    for (const auto& s : window(*r, window_spec))
      for (int f = 0; f < window_spec.n; ++f) {
        p.pred.push_back(pose);
        p.gt.push_back(r->frames[s.target_begin + static_cast<std::size_t>(f)].pose.cast<double>());
        p.distances_cm.push_back(r->distance_cm);
      }
  return p;
}

EvalReport evaluate(const Prediction& p) { return per_position_report(p.pred, p.gt, p.distances_cm); }

}  // namespace apose
