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

#include <cstddef>
#include <span>
#include <vector>

namespace apose {

/// One period of a logarithmic swept sine, emitted back to back by the speaker.
struct TspSignal {
  std::vector<double> samples;
  double sample_rate = 16000.0;
  std::size_t period_len = 600;
  double f_lo = 100.0;
  double f_hi = 7600.0;

  double frame_rate() const { return sample_rate / static_cast<double>(period_len); }
  /// Sample of the infinitely repeated excitation; `index` may be negative.
  double periodic(std::ptrdiff_t index) const;
};

/// Exponential sweep f_lo -> f_hi spanning exactly one period.
/// Throws std::invalid_argument when the bounds are not 0 < f_lo < f_hi < fs/2
/// or period_len is zero.
TspSignal generate_tsp(double sample_rate = 16000.0, std::size_t period_len = 600,
                       double f_lo = 100.0, double f_hi = 7600.0);

/// Instantaneous frequency of the sweep law at time `t` seconds into the period.
double tsp_instantaneous_frequency(const TspSignal& tsp, double t);

/// Drops the first `alpha` samples so that later framing starts alpha samples late.
/// Requires 0 <= alpha <= period_len and stream.size() >= alpha + period_len.
std::vector<double> phase_shift_stream(std::span<const double> stream, std::size_t alpha,
                                       std::size_t period_len);

/// Consecutive non-overlapping frames of `frame_len` samples; a trailing partial
/// frame is discarded.
std::vector<std::span<const double>> frame_stream(std::span<const double> stream,
                                                  std::size_t frame_len);

/// Delays `buffer` by a real number of samples using linear interpolation.
/// Output has the input length; samples before the delay are zero.
std::vector<double> fractional_delay(std::span<const double> buffer, double delay);

}  // namespace apose
