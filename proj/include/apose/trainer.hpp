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
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "apose/config.hpp"
#include "apose/dataset.hpp"
#include "apose/metrics.hpp"
#include "apose/model.hpp"

namespace apose {

// ---- Synthetic corpus ---------------------------------------------------------

/// Raw audio and pose rows of one recording session.
struct Session {
  std::uint16_t subject_id = 0;
  double distance_cm = 0.0;
  BFormat audio;
  std::vector<PoseRow> poses;
};

/// Renders subject `subject` (>= 1) standing at `distance_cm`. Deterministic in config.seed.
Session synthesize_session(const RunConfig& config, std::uint16_t subject, double distance_cm);

/// Empty room, config.empty_duration seconds.
BFormat synthesize_empty_room(const RunConfig& config);

struct SessionEntry {
  std::uint16_t subject_id = 0;
  double distance_cm = 0.0;
  std::string wav;  // relative to the corpus directory
  std::string csv;
  std::size_t frames = 0;
};

struct CorpusManifest {
  std::vector<SessionEntry> sessions;
  std::string empty_wav;  // empty when no empty-room recording exists
};

/// Writes one WAV/CSV pair per (subject, distance), the empty-room WAV, manifest.csv,
/// and the un-augmented feature datasets dataset.apds and empty_room.apds.
CorpusManifest synthesize_corpus(const RunConfig& config, const std::filesystem::path& dir);
CorpusManifest read_manifest(const std::filesystem::path& dir);

/// Features of every session, augmented with config.alphas unless the subject is
/// `held_out`. Sessions are processed on config.threads workers; output order follows
/// the input.
std::vector<Recording> build_recordings(const RunConfig& config, const std::vector<Session>& sessions,
                                        std::uint16_t held_out);

/// Loads every session listed in the manifest.
std::vector<Session> load_sessions(const std::filesystem::path& dir, const CorpusManifest& manifest);

// ---- Model bundle -------------------------------------------------------------

/// Estimator, discriminator and feature normalization of one run.
struct TrainedModel {
  PoseEstimator<float> estimator;
  PositionDiscriminator<float> discriminator;
  Normalizer normalizer;

  TrainedModel(const WindowSpec& window, int bands, const ArchSpec& arch, std::uint64_t seed);

  /// Every parameter plus norm.mean, norm.inv_std and meta.* shape tensors.
  ad::ParamSet<float> checkpoint() const;
  static TrainedModel from_checkpoint(const ad::ParamSet<float>& tensors);
};

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

// ---- Training -----------------------------------------------------------------

/// Adversarial training over windows of the given recordings. Initialization fits the
/// normalizer and sets the output bias to the mean training pose.
class Trainer {
 public:
  Trainer(const RunConfig& config, std::vector<const Recording*> train);

  TrainedModel& model() { return model_; }
  std::size_t sample_count() const { return samples_.size(); }
  std::int64_t steps_per_epoch() const;
  /// Steps fit() will run: max_steps when set, otherwise epochs * steps_per_epoch.
  std::int64_t planned_steps() const;

  /// One train_step on the next batch of the shuffled epoch order.
  LossReport step();

  /// Runs planned_steps(); `on_epoch(epoch)` fires after every completed epoch and once
  /// more after a trailing partial epoch.
  std::vector<LossReport> fit(const std::function<void(int epoch)>& on_epoch = {});

 private:
  void reshuffle();

  RunConfig config_;
  WindowSpec window_;
  std::vector<const Recording*> train_;
  std::vector<TrainSample> samples_;
  TrainedModel model_;
  Optimizers<float> opt_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  int epoch_ = 0;
};

void write_loss_csv(std::ostream& out, const std::vector<LossReport>& reports);

// ---- Inference and evaluation -------------------------------------------------

/// Predictions for every window of every recording; frame i of a window maps to source
/// frame target_begin + i.
struct Prediction {
  PoseSequence pred;
  PoseSequence gt;
  std::vector<double> distances_cm;
};

Prediction predict(TrainedModel& model, const std::vector<const Recording*>& recordings, int batch_size = 64);

/// Mean pose of every frame in `train`.
PoseFrame mean_pose(const std::vector<const Recording*>& train);

/// The constant prediction `pose` on the windowed frames of `test`.
Prediction constant_prediction(const PoseFrame& pose, const std::vector<const Recording*>& test,
                               const WindowSpec& window);

EvalReport evaluate(const Prediction& p);

}  // namespace apose
