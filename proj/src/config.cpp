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

#include "apose/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "apose/errors.hpp"

namespace apose {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto z = s.find_last_not_of(" \t\r");
  return s.substr(a, z - a + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& text) {
  const std::string s = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("cannot parse '" + text + "' as a number");
  return v;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<double>(item));
  return out;
}

Eigen::Vector3d parse_vec3(const std::string& text) {
  const auto v = parse_list(text);
  if (v.size() != 3) throw std::invalid_argument("expected three comma-separated values, got '" + text + "'");
  return {v[0], v[1], v[2]};
}

std::string fmt_vec3(const Eigen::Vector3d& v) { return fmt(v.x()) + "," + fmt(v.y()) + "," + fmt(v.z()); }

template <typename T>
ConfigField number(const char* name, const char* help, T& ref) {
  if constexpr (std::is_floating_point_v<T>)
    return {name, help, [&ref] { return fmt(ref); }, [&ref](const std::string& s) { ref = parse_number<T>(s); }};
  else
    return {name, help, [&ref] { return fmt_int(ref); }, [&ref](const std::string& s) { ref = parse_number<T>(s); }};
}

ConfigField vec3(const char* name, const char* help, Eigen::Vector3d& ref) {
  return {name, help, [&ref] { return fmt_vec3(ref); }, [&ref](const std::string& s) { ref = parse_vec3(s); }};
}

ConfigField text(const char* name, const char* help, std::string& ref) {
  return {name, help, [&ref] { return ref; }, [&ref](const std::string& s) { ref = trim(s); }};
}

}  // namespace

std::vector<double> parse_fraction_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    const auto slash = item.find('/');
    if (slash == std::string::npos) {
      out.push_back(parse_number<double>(item));
    } else {
      const double den = parse_number<double>(item.substr(slash + 1));
      if (den == 0.0) throw std::invalid_argument("zero denominator in '" + item + "'");
      out.push_back(parse_number<double>(item.substr(0, slash)) / den);
    }
  }
  return out;
}

Scene RunConfig::scene() const {
  Scene s;
  s.room_dims = room;
  s.speaker_pos = speaker;
  s.mic_pos = mic;
  s.wall_reflectance = wall_reflectance;
  s.scatter_gain = scatter_gain;
  s.occlusion_radius = occlusion_radius;
  s.occlusion_sigma = occlusion_sigma;
  s.noise_snr_db = noise_snr_db;
  s.speed_of_sound = speed_of_sound;
  return s;
}

TspSignal RunConfig::tsp() const { return generate_tsp(sample_rate, period_len, f_lo, f_hi); }

FeatureConfig RunConfig::features() const {
  FeatureConfig f;
  f.bands = b;
  f.n_fft = n_fft;
  f.hop = hop;
  f.fft_size = fft_size;
  f.sample_rate = sample_rate;
  f.mel_lo = mel_lo;
  f.mel_hi = mel_hi;
  return f;
}

WindowSpec RunConfig::window() const { return {n, k}; }

LossWeights RunConfig::weights() const { return {walpha, wbeta, wgamma}; }

void RunConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(sample_rate > 0 && period_len > 0, "sample_rate and period_len must be positive");
  require(duration > 0, "duration must be positive");
  require(empty_duration >= 0, "empty_duration must be non-negative");
  require(subjects >= 1 && subjects < 0xFFFF, "subjects must be in [1, 65534]");
  require(!distances.empty(), "distances must not be empty");
  for (double d : distances) require(d >= 0 && d <= 100, "distances must lie in [0, 100] cm");
  require(!motions.empty(), "motions must not be empty");
  require(n >= 1 && k >= 0, "need n >= 1 and k >= 0");
  require(walpha >= 0 && wbeta >= 0 && wgamma >= 0, "loss weights must be non-negative");
  for (double a : alphas) require(a > 0 && a < 1, "alphas must lie in (0, 1)");
  require(lr >= 0, "lr must be non-negative");
  require(batch_size >= 1, "batch_size must be positive");
  require(epochs >= 1 || max_steps > 0, "need epochs >= 1 or max_steps > 0");
  require(max_steps >= 0, "max_steps must be non-negative");
  require(b % 4 == 0 && b >= 4, "b must be a positive multiple of 4");
}

std::vector<ConfigField> config_fields(RunConfig& c) {
  std::vector<ConfigField> f{
      number("sample_rate", "sample rate in Hz", c.sample_rate),
      number("period_len", "TSP period in samples", c.period_len),
      number("f_lo", "sweep start frequency in Hz", c.f_lo),
      number("f_hi", "sweep end frequency in Hz", c.f_hi),
      number("b", "mel bands", c.b),
      number("n_fft", "STFT window length", c.n_fft),
      number("hop", "STFT hop", c.hop),
      number("fft_size", "zero-padded FFT length", c.fft_size),
      number("mel_lo", "mel bank low edge in Hz", c.mel_lo),
      number("mel_hi", "mel bank high edge in Hz", c.mel_hi),
      vec3("room", "room size x,y,z in m", c.room),
      vec3("speaker", "speaker position in m", c.speaker),
      vec3("mic", "microphone position in m", c.mic),
      number("wall_reflectance", "first-order wall reflection gain", c.wall_reflectance),
      number("scatter_gain", "per-joint scatter gain", c.scatter_gain),
      number("occlusion_radius", "bone capsule radius in m", c.occlusion_radius),
      number("occlusion_sigma", "direct-path attenuation per occluding capsule", c.occlusion_sigma),
      number("noise_snr_db", "noise level below a unit-gain sine in dB", c.noise_snr_db),
      number("speed_of_sound", "m/s", c.speed_of_sound),
      number("subjects", "synthetic subjects", c.subjects),
      {"distances", "standing distances in cm", [&c] { return fmt_list(c.distances); },
       [&c](const std::string& s) { c.distances = parse_list(s); }},
      number("duration", "seconds per session", c.duration),
      number("empty_duration", "seconds of empty-room recording", c.empty_duration),
      {"motions", "motion script", [&c] {
         std::string s;
         for (std::size_t i = 0; i < c.motions.size(); ++i) s += (i ? "," : "") + c.motions[i];
         return s;
       },
       [&c](const std::string& s) { c.motions = split(s, ','); }},
      number("jitter", "relative keyframe jitter", c.jitter),
      number("n", "poses per window", c.n),
      number("k", "reference frames before the window", c.k),
      number("walpha", "pose loss weight", c.walpha),
      number("wbeta", "smoothness loss weight", c.wbeta),
      number("wgamma", "adversarial std loss weight", c.wgamma),
      {"alphas", "phase-shift fractions, e.g. 1/3,2/3 (empty disables)", [&c] { return fmt_list(c.alphas); },
       [&c](const std::string& s) { c.alphas = parse_fraction_list(s); }},
      number("lr", "Adam learning rate", c.lr),
      number("batch_size", "windows per step", c.batch_size),
      number("epochs", "training epochs", c.epochs),
      number("max_steps", "step budget (0 = unlimited)", c.max_steps),
      number("clip_norm", "global gradient norm clip", c.clip_norm),
      number("seed", "master seed", c.seed),
      number("held_out", "held-out subject id", c.held_out),
      number("threads", "worker threads for ingestion (0 = all cores)", c.threads),
      text("corpus", "corpus directory", c.corpus),
      text("out", "output directory", c.out),
  };
  return f;
}

void apply_config_text(RunConfig& config, const std::string& text) {
  auto fields = config_fields(config);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const ConfigField& f) { return f.name == key; });
    if (it == fields.end()) throw FormatError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    try {
      it->set(line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw FormatError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

std::string dump_config(const RunConfig& config) {
  RunConfig copy = config;
  std::string out;
  for (const auto& f : config_fields(copy)) out += f.name + " = " + f.get() + "\n";
  return out;
}

}  // namespace apose
