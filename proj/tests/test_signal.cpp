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

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "apose/features.hpp"
#include "apose/signal.hpp"

using namespace apose;

namespace {

// Ridge frequency per STFT frame: short window, heavy zero padding, parabolic peak refinement.
std::vector<std::pair<double, double>> ridge(const TspSignal& tsp) {
  const std::size_t win = 64, hop = 8, pad = 4096;
  std::vector<std::pair<double, double>> out;
  const auto w = hann_window(win);
  for (std::size_t start = 0; start + win <= tsp.samples.size(); start += hop) {
    std::vector<std::complex<double>> buf(pad);
    for (std::size_t i = 0; i < win; ++i) buf[i] = tsp.samples[start + i] * w[i];
    fft_radix2(buf);
    std::size_t best = 1;
    for (std::size_t k = 1; k < pad / 2; ++k)
      if (std::abs(buf[k]) > std::abs(buf[best])) best = k;
    const double a = std::abs(buf[best - 1]), b = std::abs(buf[best]), c = std::abs(buf[best + 1]);
    const double shift = 0.5 * (a - c) / (a - 2 * b + c);
    const double t = (static_cast<double>(start) + win / 2.0) / tsp.sample_rate;
    out.emplace_back(t, (static_cast<double>(best) + shift) * tsp.sample_rate / pad);
  }
  return out;
}

}  // namespace

TEST_SUITE("signal") {
  TEST_CASE("default sweep shape and amplitude") {
    const TspSignal tsp = generate_tsp(16000, 600, 100, 7600);
    CHECK(tsp.samples.size() == 600);
    double peak = 0;
    for (double s : tsp.samples) peak = std::max(peak, std::abs(s));
    CHECK(peak <= 1.0);
    CHECK(tsp.frame_rate() == doctest::Approx(16000.0 / 600.0));
  }

  TEST_CASE("sweep endpoints from STFT ridge tracking") {
    const TspSignal tsp = generate_tsp(16000, 600, 100, 7600);
    const auto r = ridge(tsp);
    // Fit log f = a + b t on the well-resolved part of the ridge, then extrapolate.
    double n = 0, st = 0, sf = 0, stt = 0, stf = 0;
    double prev = 0;
    for (const auto& [t, f] : r) {
      if (f < 600 || f > 7000) continue;
      CHECK(f >= prev - 50);
      prev = f;
      const double lf = std::log(f);
      n += 1;
      st += t;
      sf += lf;
      stt += t * t;
      stf += t * lf;
    }
    REQUIRE(n >= 10);
    const double b = (n * stf - st * sf) / (n * stt - st * st);
    const double a = (sf - b * st) / n;
    const double f_first = std::exp(a);
    const double f_last = std::exp(a + b * (599.0 / 16000.0));
    CHECK(std::abs(f_first - 100.0) / 100.0 < 0.05);
    CHECK(std::abs(f_last - 7600.0) / 7600.0 < 0.05);
  }

  TEST_CASE("instantaneous frequency is monotone and spans the bounds") {
    const TspSignal tsp = generate_tsp();
    CHECK(tsp_instantaneous_frequency(tsp, 0.0) == doctest::Approx(100.0));
    CHECK(tsp_instantaneous_frequency(tsp, 600.0 / 16000.0) == doctest::Approx(7600.0));
    double prev = 0;
    for (int i = 0; i < 600; ++i) {
      const double f = tsp_instantaneous_frequency(tsp, i / 16000.0);
      CHECK(f > prev);
      prev = f;
    }
  }

  TEST_CASE("generation is bit-reproducible") {
    const auto a = generate_tsp(16000, 600, 100, 7600), b = generate_tsp(16000, 600, 100, 7600);
    CHECK(a.samples == b.samples);
  }

  TEST_CASE("invalid sweep bounds are rejected") {
    CHECK_THROWS_AS(generate_tsp(16000, 600, 100, 8000), std::invalid_argument);
    CHECK_THROWS_AS(generate_tsp(16000, 0, 100, 7600), std::invalid_argument);
    CHECK_THROWS_AS(generate_tsp(16000, 600, 0, 7600), std::invalid_argument);
    CHECK_THROWS_AS(generate_tsp(16000, 600, 5000, 4000), std::invalid_argument);
  }

  TEST_CASE("periodic extension wraps in both directions") {
    const TspSignal tsp = generate_tsp();
    CHECK(tsp.periodic(0) == tsp.samples[0]);
    CHECK(tsp.periodic(600) == tsp.samples[0]);
    CHECK(tsp.periodic(-1) == tsp.samples[599]);
    CHECK(tsp.periodic(1205) == tsp.samples[5]);
  }

  TEST_CASE("phase shift by zero is the identity") {
    std::vector<double> x(1800);
    std::iota(x.begin(), x.end(), 0.0);
    CHECK(phase_shift_stream(x, 0, 600) == x);
  }

  TEST_CASE("phase shift by a full period advances frames by one") {
    const TspSignal tsp = generate_tsp();
    std::vector<double> x(600 * 5);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = tsp.periodic(static_cast<std::ptrdiff_t>(i));
    const auto shifted = phase_shift_stream(x, 600, 600);
    const auto a = frame_stream(x, 600), b = frame_stream(shifted, 600);
    REQUIRE(b.size() == a.size() - 1);
    for (std::size_t t = 0; t < b.size(); ++t)
      CHECK(std::equal(b[t].begin(), b[t].end(), a[t + 1].begin()));
  }

  TEST_CASE("shifted framing equals direct slicing for every offset") {
    std::mt19937 rng(4);
    std::normal_distribution<double> d;
    const std::size_t L = 60;
    std::vector<double> x(L * 7 + 13);
    for (double& v : x) v = d(rng);
    for (std::size_t a = 0; a < L; ++a) {
      const auto s = phase_shift_stream(x, a, L);
      const auto frames = frame_stream(s, L);
      CHECK(frames.size() == (x.size() - a) / L);
      for (std::size_t t = 0; t < frames.size(); ++t)
        for (std::size_t i = 0; i < L; ++i) REQUIRE(frames[t][i] == x[t * L + a + i]);
    }
  }

  TEST_CASE("phase shift by a third of the period") {
    std::vector<double> x(1800);
    std::iota(x.begin(), x.end(), 0.0);
    const auto shifted = phase_shift_stream(x, 200, 600);
    const auto frames = frame_stream(shifted, 600);
    REQUIRE(frames.size() == 2);
    CHECK(frames[0].front() == 200.0);
    CHECK(frames[1].front() == 800.0);
    CHECK(frames[1].back() == 1399.0);
  }

  TEST_CASE("phase shift argument checks") {
    std::vector<double> x(1000);
    CHECK_THROWS_AS(phase_shift_stream(x, 601, 600), std::invalid_argument);
    CHECK_THROWS_AS(phase_shift_stream(x, 500, 600), std::invalid_argument);
  }

  TEST_CASE("fractional delay examples") {
    std::vector<double> x{0, 0, 1, 0, 0, 0, 0, 0};
    CHECK(fractional_delay(x, 0.0) == x);
    const auto y3 = fractional_delay(x, 3.0);
    CHECK(y3 == std::vector<double>{0, 0, 0, 0, 0, 1, 0, 0});
    const auto y = fractional_delay(x, 2.5);
    CHECK(y[4] == doctest::Approx(0.5));
    CHECK(y[5] == doctest::Approx(0.5));
    CHECK(std::accumulate(y.begin(), y.end(), 0.0) == doctest::Approx(1.0));
    const auto far = fractional_delay(x, 100.0);
    CHECK(std::all_of(far.begin(), far.end(), [](double v) { return v == 0.0; }));
    CHECK_THROWS_AS(fractional_delay(x, -1.0), std::invalid_argument);
  }

  TEST_CASE("fractional delay never amplifies energy") {
    std::mt19937 rng(9);
    std::normal_distribution<double> d;
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x(64);
      for (double& v : x) v = d(rng);
      const auto y = fractional_delay(x, u(rng));
      const auto energy = [](const std::vector<double>& v) { return std::inner_product(v.begin(), v.end(), v.begin(), 0.0); };
      CHECK(energy(y) <= energy(x) + 1e-12);
    }
  }
}
