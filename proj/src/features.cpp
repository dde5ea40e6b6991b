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

#include "apose/features.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace apose {

namespace {

// Twiddles exp(-2 pi i k / n) for k < n / 2, cached per size.
const std::vector<std::complex<double>>& twiddles(std::size_t n) {
  thread_local std::vector<std::vector<std::complex<double>>> cache;
  const auto level = static_cast<std::size_t>(std::countr_zero(n));
  if (cache.size() <= level) cache.resize(level + 1);
  auto& t = cache[level];
  if (t.empty()) {
    t.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      t[k] = {std::cos(a), std::sin(a)};
    }
  }
  return t;
}

}  // namespace

void fft_radix2(std::span<std::complex<double>> data) {
  const std::size_t n = data.size();
  if (n == 0 || !std::has_single_bit(n)) throw std::invalid_argument("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  if (n == 1) return;
  const auto& tw = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2, stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<double> w = tw[k * stride];
        const std::complex<double> b = data[start + k + half];
        const std::complex<double> v(b.real() * w.real() - b.imag() * w.imag(), b.real() * w.imag() + b.imag() * w.real());
        const std::complex<double> u = data[start + k];
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

Spectrogram stft(std::span<const double> channel, std::size_t n_fft, std::size_t hop, std::size_t fft_size) {
  if (fft_size == 0) fft_size = n_fft;
  if (n_fft == 0 || !std::has_single_bit(n_fft)) throw std::invalid_argument("stft: n_fft must be a power of two");
  if (!std::has_single_bit(fft_size) || fft_size < n_fft)
    throw std::invalid_argument("stft: fft_size must be a power of two >= n_fft");
  if (hop == 0 || hop > n_fft) throw std::invalid_argument("stft: hop must lie in [1, n_fft]");
  if (channel.size() < n_fft) throw std::invalid_argument("stft: input shorter than n_fft");

  const std::size_t frames = (channel.size() - n_fft) / hop + 1;
  const std::size_t bins = fft_size / 2 + 1;
  const std::vector<double> window = hann_window(n_fft);
  Spectrogram out(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < n_fft; ++i) buf[i] = channel[f * hop + i] * window[i];
    fft_radix2(buf);
    for (std::size_t k = 0; k < bins; ++k) out(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = buf[k];
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelBank MelBank::build(std::size_t bands, std::size_t fft_size, double sample_rate, double f_lo, double f_hi) {
  if (bands == 0) throw std::invalid_argument("mel bank: need at least one band");
  if (!(0.0 <= f_lo && f_lo < f_hi && f_hi <= sample_rate / 2.0))
    throw std::invalid_argument("mel bank: need 0 <= f_lo < f_hi <= fs/2");
  MelBank bank;
  bank.sample_rate = sample_rate;
  bank.fft_size = fft_size;
  bank.f_lo = f_lo;
  bank.f_hi = f_hi;
  const auto bins = static_cast<Eigen::Index>(fft_size / 2 + 1);
  bank.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bands), bins);

  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(bands + 1));
  bank.centers_hz.assign(edges.begin() + 1, edges.end() - 1);

  for (std::size_t b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      bank.weights(static_cast<Eigen::Index>(b), k) = w;
    }
    const double sum = bank.weights.row(static_cast<Eigen::Index>(b)).sum();
    if (!(sum > 0.0))
      throw std::invalid_argument("mel bank: band " + std::to_string(b) + " covers no bin; increase fft_size");
    bank.weights.row(static_cast<Eigen::Index>(b)) /= sum;
  }
  return bank;
}

namespace {

void check_geometry(const BFormatStft& s, const MelBank& bank) {
  for (int c = 0; c < 4; ++c) {
    if (s[c].rows() != s[0].rows() || s[c].cols() != s[0].cols())
      throw std::invalid_argument("features: B-format channels disagree on STFT geometry");
  }
  if (s[0].rows() == 0) throw std::invalid_argument("features: empty STFT");
  if (s[0].cols() != bank.bins()) throw std::invalid_argument("features: STFT bins do not match the mel bank");
}

}  // namespace

Eigen::MatrixXd logmel_frame(const BFormatStft& s, const MelBank& bank) {
  check_geometry(s, bank);
  Eigen::MatrixXd out(bank.bands(), 4);
  for (int c = 0; c < 4; ++c) {
    const Eigen::VectorXd power = s[c].cwiseAbs2().colwise().mean().transpose();
    out.col(c) = ((bank.weights * power).array() + kLogFloor).log().matrix();
  }
  return out;
}

Eigen::MatrixXd intensity_frame(const BFormatStft& s, const MelBank& bank) {
  check_geometry(s, bank);
  const Eigen::Index frames = s[0].rows(), bins = s[0].cols();
  Eigen::MatrixXd per_bin = Eigen::MatrixXd::Zero(bins, 3);
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      const std::complex<double> w = s[0](f, k);
      const auto re = [&](const std::complex<double>& x) { return w.real() * x.real() + w.imag() * x.imag(); };
      const Eigen::Vector3d i(re(s[1](f, k)), re(s[2](f, k)), re(s[3](f, k)));
      per_bin.row(k) += (i / (i.norm() + kLogFloor)).transpose();
    }
  }
  per_bin /= static_cast<double>(frames);
  // Rows of the bank sum to one, so this is the mel-weighted mean.
  return bank.weights * per_bin;
}

Eigen::MatrixXd FeatureFrame::assembled() const {
  if (logmel.rows() != intensity.rows() || logmel.cols() != 4 || intensity.cols() != 3)
    throw std::invalid_argument("assemble: expected b x 4 log-mel and b x 3 intensity");
  Eigen::MatrixXd out(logmel.rows(), 7);
  out << logmel, intensity;
  return out;
}

FeatureFrame FeatureFrame::disassemble(const Eigen::MatrixXd& frame) {
  if (frame.cols() != 7) throw std::invalid_argument("disassemble: expected 7 columns");
  return {frame.leftCols(4), frame.rightCols(3)};
}

FeatureFrame assemble(const Eigen::MatrixXd& logmel, const Eigen::MatrixXd& intensity) {
  FeatureFrame f{logmel, intensity};
  f.assembled();  // validates shapes
  return f;
}

FeatureExtractor::FeatureExtractor(const FeatureConfig& config)
    : config_(config),
      bank_(MelBank::build(config.bands, config.fft_size, config.sample_rate, config.mel_lo, config.mel_hi)) {}

FeatureFrame FeatureExtractor::frame(const Eigen::Ref<const BFormat>& period) const {
  const auto len = static_cast<std::size_t>(period.rows());
  if (len == 0) throw std::invalid_argument("feature frame: empty period");
  const std::size_t starts = (len + config_.hop - 1) / config_.hop;
  const std::size_t span = (starts - 1) * config_.hop + config_.n_fft;
  BFormatStft s;
  std::vector<double> wrapped(span);
  for (int c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < span; ++i) wrapped[i] = period(static_cast<Eigen::Index>(i % len), c);
    s[c] = stft(wrapped, config_.n_fft, config_.hop, config_.fft_size);
  }
  return {logmel_frame(s, bank_), intensity_frame(s, bank_)};
}

std::vector<FeatureFrame> FeatureExtractor::frames(const BFormat& audio, std::size_t period_len,
                                                   std::size_t offset) const {
  std::vector<FeatureFrame> out;
  if (static_cast<Eigen::Index>(offset) >= audio.rows()) return out;
  const std::size_t count = (static_cast<std::size_t>(audio.rows()) - offset) / period_len;
  out.reserve(count);
  for (std::size_t t = 0; t < count; ++t)
    out.push_back(frame(audio.middleRows(static_cast<Eigen::Index>(offset + t * period_len),
                                         static_cast<Eigen::Index>(period_len))));
  return out;
}

Eigen::MatrixXd flatten_frames(const std::vector<FeatureFrame>& frames) {
  if (frames.empty()) return {};
  const Eigen::Index d = frames.front().bands() * 7;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(frames.size()), d);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a = frames[i].assembled();
    if (a.size() != d) throw std::invalid_argument("flatten_frames: inconsistent band counts");
    out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(a.data(), d);
  }
  return out;
}

PcaResult pca_project(const Eigen::MatrixXd& data, int dims) {
  if (dims < 1) throw std::invalid_argument("pca: dims must be positive");
  if (data.rows() < dims) throw std::invalid_argument("pca: fewer samples than requested dimensions");
  PcaResult r;
  r.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - r.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows());
  r.total_variance = cov.trace();
  if (!(r.total_variance > 1e-30)) throw std::invalid_argument("pca: input has zero variance");

  const Eigen::Index d = data.cols();
  r.axes.resize(d, dims);
  r.explained_variance.resize(dims);
  for (int a = 0; a < dims; ++a) {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + a);
    auto orthogonalize = [&](Eigen::VectorXd& x) {
      for (int p = 0; p < a; ++p) x -= r.axes.col(p).dot(x) * r.axes.col(p);
    };
    orthogonalize(v);
    v.normalize();
    for (int it = 0; it < 1000; ++it) {
      Eigen::VectorXd next = cov * v;
      orthogonalize(next);
      const double norm = next.norm();
      if (norm == 0.0) break;
      next /= norm;
      const double change = std::min((next - v).norm(), (next + v).norm());
      v = next;
      if (change < 1e-10) break;
    }
    Eigen::Index big;
    v.cwiseAbs().maxCoeff(&big);
    if (v[big] < 0.0) v = -v;
    const double lambda = v.dot(cov * v);
    r.axes.col(a) = v;
    r.explained_variance[a] = lambda;
    cov -= lambda * v * v.transpose();
  }
  r.points = centered * r.axes;
  return r;
}

}  // namespace apose
