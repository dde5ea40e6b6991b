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

#include "apose/signal.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace apose {

double TspSignal::periodic(std::ptrdiff_t index) const {
  const auto len = static_cast<std::ptrdiff_t>(period_len);
  std::ptrdiff_t i = index % len;
  if (i < 0) i += len;
  return samples[static_cast<std::size_t>(i)];
}

TspSignal generate_tsp(double sample_rate, std::size_t period_len, double f_lo, double f_hi) {
  if (period_len == 0) throw std::invalid_argument("generate_tsp: period_len must be positive");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("generate_tsp: sample_rate must be positive");
  if (!(f_lo > 0.0 && f_lo < f_hi))
    throw std::invalid_argument("generate_tsp: need 0 < f_lo < f_hi");
  if (!(f_hi < sample_rate / 2.0))
    throw std::invalid_argument("generate_tsp: f_hi must be below Nyquist");

  TspSignal tsp;
  tsp.sample_rate = sample_rate;
  tsp.period_len = period_len;
  tsp.f_lo = f_lo;
  tsp.f_hi = f_hi;
  tsp.samples.resize(period_len);

  // phase(t) = 2 pi f_lo T / ln(r) * (exp(t ln(r) / T) - 1), r = f_hi / f_lo
  const double duration = static_cast<double>(period_len) / sample_rate;
  const double log_ratio = std::log(f_hi / f_lo);
  const double k = 2.0 * std::numbers::pi * f_lo * duration / log_ratio;
  for (std::size_t i = 0; i < period_len; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    tsp.samples[i] = std::sin(k * std::expm1(t * log_ratio / duration));
  }
  return tsp;
}

double tsp_instantaneous_frequency(const TspSignal& tsp, double t) {
  const double duration = static_cast<double>(tsp.period_len) / tsp.sample_rate;
  return tsp.f_lo * std::exp(t / duration * std::log(tsp.f_hi / tsp.f_lo));
}

std::vector<double> phase_shift_stream(std::span<const double> stream, std::size_t alpha,
                                       std::size_t period_len) {
  if (period_len == 0) throw std::invalid_argument("phase_shift_stream: period_len must be positive");
  if (alpha > period_len) throw std::invalid_argument("phase_shift_stream: alpha exceeds one period");
  if (stream.size() < alpha + period_len)
    throw std::invalid_argument("phase_shift_stream: stream shorter than alpha + one frame");
  return {stream.begin() + static_cast<std::ptrdiff_t>(alpha), stream.end()};
}

std::vector<std::span<const double>> frame_stream(std::span<const double> stream,
                                                  std::size_t frame_len) {
  if (frame_len == 0) throw std::invalid_argument("frame_stream: frame_len must be positive");
  std::vector<std::span<const double>> frames;
  const std::size_t count = stream.size() / frame_len;
  frames.reserve(count);
  for (std::size_t t = 0; t < count; ++t) frames.push_back(stream.subspan(t * frame_len, frame_len));
  return frames;
}

std::vector<double> fractional_delay(std::span<const double> buffer, double delay) {
  if (!(delay >= 0.0)) throw std::invalid_argument("fractional_delay: delay must be non-negative");
  std::vector<double> out(buffer.size(), 0.0);
  const double whole = std::floor(delay);
  if (whole >= static_cast<double>(buffer.size())) return out;
  const auto shift = static_cast<std::size_t>(whole);
  const double frac = delay - whole;
  // y[i] = (1 - frac) x[i - shift] + frac x[i - shift - 1]
  for (std::size_t i = shift; i < buffer.size(); ++i) {
    const std::size_t j = i - shift;
    double y = (1.0 - frac) * buffer[j];
    if (j > 0) y += frac * buffer[j - 1];
    out[i] = y;
  }
  return out;
}

}  // namespace apose
