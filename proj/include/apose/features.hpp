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

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "apose/acoustic_sim.hpp"

namespace apose {

using Spectrogram = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// In-place iterative radix-2 FFT. Size must be a power of two.
void fft_radix2(std::span<std::complex<double>> data);

/// Hann-windowed short-time transform, frames x (fft_size / 2 + 1).
/// Each `n_fft`-sample frame is zero-padded to `fft_size` (0 means fft_size = n_fft).
/// Throws std::invalid_argument for non power-of-two sizes, hop > n_fft or
/// fft_size < n_fft, and when the input is shorter than n_fft.
Spectrogram stft(std::span<const double> channel, std::size_t n_fft, std::size_t hop, std::size_t fft_size = 0);

/// Periodic Hann window.
std::vector<double> hann_window(std::size_t n);

double hz_to_mel(double hz);  // HTK
double mel_to_hz(double mel);

/// Triangular filters evenly spaced on the HTK mel scale, each normalized to unit sum.
struct MelBank {
  Eigen::MatrixXd weights;  // bands x bins
  std::vector<double> centers_hz;
  double sample_rate = 16000.0;
  std::size_t fft_size = 0;
  double f_lo = 0.0;
  double f_hi = 0.0;

  Eigen::Index bands() const { return weights.rows(); }
  Eigen::Index bins() const { return weights.cols(); }

  /// Throws std::invalid_argument when a filter would receive no frequency bin.
  static MelBank build(std::size_t bands, std::size_t fft_size, double sample_rate, double f_lo, double f_hi);
};

inline constexpr double kLogFloor = 1e-10;

using BFormatStft = std::array<Spectrogram, 4>;

/// log(mel · mean_frames |S_c|^2 + 1e-10) per channel c, bands x 4.
Eigen::MatrixXd logmel_frame(const BFormatStft& stft, const MelBank& bank);

/// Per cell I = Re{conj(W) (X, Y, Z)}, normalized by |I| + 1e-10, then mel-weighted over
/// bins and averaged over frames; bands x 3.
Eigen::MatrixXd intensity_frame(const BFormatStft& stft, const MelBank& bank);

/// a_t: log-mel (bands x 4, columns W X Y Z) next to intensity (bands x 3, columns x y z).
struct FeatureFrame {
  Eigen::MatrixXd logmel;
  Eigen::MatrixXd intensity;

  Eigen::Index bands() const { return logmel.rows(); }
  /// bands x 7 in the order [W X Y Z | x y z].
  Eigen::MatrixXd assembled() const;
  static FeatureFrame disassemble(const Eigen::MatrixXd& frame);
};

FeatureFrame assemble(const Eigen::MatrixXd& logmel, const Eigen::MatrixXd& intensity);

struct FeatureConfig {
  std::size_t bands = 64;
  std::size_t n_fft = 256;
  std::size_t hop = 60;  // divides the default 600-sample period and keeps Hann^2 coverage flat
  std::size_t fft_size = 2048;
  double sample_rate = 16000.0;
  double mel_lo = 100.0;
  double mel_hi = 7600.0;
};

/// Feature extraction with a cached filter bank.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureConfig& config = {});

  const FeatureConfig& config() const { return config_; }
  const MelBank& bank() const { return bank_; }

  /// Features of one period of B-format audio (rows = samples). The excitation is periodic,
  /// so STFT frames start every hop within the period and wrap around its end; every sample
  /// is analysed and a circular shift of the period barely moves the features.
  FeatureFrame frame(const Eigen::Ref<const BFormat>& period) const;

  /// One feature frame per complete period of `audio` starting at sample `offset`.
  std::vector<FeatureFrame> frames(const BFormat& audio, std::size_t period_len, std::size_t offset = 0) const;

 private:
  FeatureConfig config_;
  MelBank bank_;
};

struct PcaResult {
  Eigen::MatrixXd points;              // N x dims
  Eigen::VectorXd explained_variance;  // eigenvalues, decreasing
  double total_variance = 0.0;
  Eigen::MatrixXd axes;  // D x dims, orthonormal columns
  Eigen::VectorXd mean;
};

/// Top principal axes of the rows of `data` by power iteration with deflation
/// (tolerance 1e-10, at most 1000 iterations per axis). Throws std::invalid_argument
/// for fewer rows than dims or zero total variance.
PcaResult pca_project(const Eigen::MatrixXd& data, int dims = 2);

/// Flattens feature frames into rows of bands * 7 values (row-major b x 7).
Eigen::MatrixXd flatten_frames(const std::vector<FeatureFrame>& frames);

}  // namespace apose
