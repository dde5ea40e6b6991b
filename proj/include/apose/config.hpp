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
#include <string>
#include <vector>

#include "apose/acoustic_sim.hpp"
#include "apose/features.hpp"
#include "apose/model.hpp"
#include "apose/signal.hpp"

namespace apose {

/// Every tunable of a run. Defaults are the reference hyperparameters.
struct RunConfig {
  // excitation
  double sample_rate = 16000.0;
  std::size_t period_len = 600;
  double f_lo = 100.0;
  double f_hi = 7600.0;

  // features
  std::size_t b = 64;
  std::size_t n_fft = 256;
  std::size_t hop = 60;  // divides the default 600-sample period and keeps Hann^2 coverage flat
  std::size_t fft_size = 2048;
  double mel_lo = 100.0;
  double mel_hi = 7600.0;

  // scene
  Eigen::Vector3d room{7.0, 9.0, 3.0};
  Eigen::Vector3d speaker{2.0, 4.5, 1.1};
  Eigen::Vector3d mic{5.0, 4.5, 1.1};
  double wall_reflectance = 0.5;
  double scatter_gain = 0.03;
  double occlusion_radius = 0.1;
  double occlusion_sigma = 2.0;
  double noise_snr_db = 20.0;
  double speed_of_sound = 343.0;

  // corpus
  int subjects = 5;
  std::vector<double> distances{0.0, 25.0, 50.0, 75.0, 100.0};
  double duration = 60.0;
  double empty_duration = 20.0;
  std::vector<std::string> motions{"standing", "t_pose", "squatting", "bowing", "walking"};
  double jitter = 0.15;

  // model and training
  int n = 8;
  int k = 16;
  double walpha = 1.0;
  double wbeta = 10.0;
  double wgamma = 1.0;
  std::vector<double> alphas{1.0 / 3.0, 2.0 / 3.0};
  double lr = 1e-3;
  int batch_size = 16;
  int epochs = 2;
  std::int64_t max_steps = 0;  // 0: run all epochs
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  int held_out = 3;
  int threads = 0;  // 0: hardware concurrency

  // paths
  std::string corpus = "corpus";
  std::string out = "run";

  Scene scene() const;
  TspSignal tsp() const;
  FeatureConfig features() const;
  WindowSpec window() const;
  LossWeights weights() const;

  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;
};

/// Named accessor over one RunConfig field.
struct ConfigField {
  std::string name;
  std::string help;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

/// All fields bound to `config`, in a stable order.
std::vector<ConfigField> config_fields(RunConfig& config);

/// Applies `key = value` lines; '#' starts a comment. Throws FormatError on
/// malformed lines, unknown keys, or unparsable values.
void apply_config_text(RunConfig& config, const std::string& text);
void load_config_file(RunConfig& config, const std::filesystem::path& path);

/// The resolved configuration as `key = value` lines, loadable by apply_config_text.
std::string dump_config(const RunConfig& config);

/// Parses "1/3, 2/3" or "0.25,0.5" into fractions; empty text yields an empty list.
std::vector<double> parse_fraction_list(const std::string& text);

}  // namespace apose
