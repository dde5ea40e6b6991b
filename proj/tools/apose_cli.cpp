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

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "apose/audio_io.hpp"
#include "apose/config.hpp"
#include "apose/dataset.hpp"
#include "apose/errors.hpp"
#include "apose/features.hpp"
#include "apose/svg.hpp"
#include "apose/trainer.hpp"

namespace fs = std::filesystem;
using namespace apose;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kFormat = 3, kNumeric = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Config file and per-field flag overrides shared by every subcommand.
struct ConfigOptions {
  std::string file;
  bool print = false;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value configuration file");
    cmd->add_flag("--print-config", print, "print the resolved configuration and exit");
    RunConfig scratch;
    for (const auto& f : config_fields(scratch)) {
      const std::string name = f.name;
      cmd->add_option_function<std::string>("--" + name, [this, name](const std::string& v) { overrides[name] = v; },
                                            f.help + " (default " + f.get() + ")");
    }
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!file.empty()) load_config_file(c, file);
    auto fields = config_fields(c);
    for (const auto& [name, value] : overrides) {
      for (auto& f : fields)
        if (f.name == name) {
          try {
            f.set(value);
          } catch (const std::invalid_argument& e) {
            throw UsageError("--" + name + ": " + e.what());
          }
        }
    }
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string report_text(const EvalReport& r) {
  std::ostringstream s;
  write_report_text(s, r);
  return s.str();
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream s;
  write_report_csv(s, r);
  return s.str();
}

DatasetHeader header_of(const RunConfig& c) {
  return {static_cast<std::uint32_t>(c.sample_rate), static_cast<std::uint32_t>(c.period_len),
          static_cast<std::uint32_t>(c.b)};
}

Session read_session(const std::string& wav, const std::string& csv, const RunConfig& c) {
  const WavData w = read_bformat_wav(wav);
  if (w.sample_rate != static_cast<std::uint32_t>(c.sample_rate))
    throw FormatError("WAV sample rate " + std::to_string(w.sample_rate) + " differs from sample_rate");
  Session s;
  s.audio = w.audio;
  s.poses = read_pose_csv(csv);
  if (s.poses.empty()) throw FormatError("pose CSV has no rows");
  s.subject_id = static_cast<std::uint16_t>(s.poses.front().subject_id);
  s.distance_cm = s.poses.front().distance_cm;
  return s;
}

/// Recordings from a corpus directory or a dataset file (the latter cannot be augmented).
std::vector<Recording> load_recordings(const RunConfig& c, const std::string& dataset, std::uint16_t held_out) {
  if (!dataset.empty()) {
    const DatasetFile file = deserialize_dataset(dataset);
    if (file.header.bands != c.b) throw FormatError("dataset band count differs from b");
    return group_recordings(file.frames);
  }
  const auto manifest = read_manifest(c.corpus);
  return build_recordings(c, load_sessions(c.corpus, manifest), held_out);
}

int cmd_synth(const RunConfig& c) {
  const CorpusManifest m = synthesize_corpus(c, c.corpus);
  std::cout << "subject_id,distance_cm,wav,csv,frames\n";
  for (const auto& s : m.sessions)
    std::cout << s.subject_id << ',' << s.distance_cm << ',' << s.wav << ',' << s.csv << ',' << s.frames << '\n';
  std::cout << m.sessions.size() << " sessions written to " << c.corpus << '\n';
  return kOk;
}

int cmd_ingest(const RunConfig& c, const std::string& wav, const std::string& csv, const std::string& output,
               bool augment) {
  const Session s = read_session(wav, csv, c);
  const FeatureExtractor extractor(c.features());
  const std::vector<double> none;
  const auto recs = augment_phase(s.audio, s.poses, augment ? c.alphas : none, extractor, c.period_len);
  const auto frames = flatten_recordings(recs);
  if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
  serialize_dataset(output, header_of(c), frames);
  std::cout << frames.size() << " frames";
  if (augment) std::cout << " (" << recs.front().frames.size() << " original, " << recs.size() - 1 << " shifted copies)";
  std::cout << " written to " << output << '\n';
  return kOk;
}

int cmd_train(RunConfig c, const std::string& dataset) {
  const auto held = static_cast<std::uint16_t>(c.held_out);
  const auto recordings = load_recordings(c, dataset, held);
  const LosoSplit split = split_loso(recordings, held);
  const fs::path out = c.out;
  fs::create_directories(out);
  write_text(out / "config.txt", dump_config(c));

  Trainer trainer(c, split.train);
  std::cout << trainer.sample_count() << " training windows, " << trainer.planned_steps() << " steps\n";
  const EvalReport untrained = evaluate(predict(trainer.model(), split.test));
  const EvalReport baseline = evaluate(constant_prediction(mean_pose(split.train), split.test, c.window()));
  const auto reports = trainer.fit([&](int epoch) {
    const fs::path ckpt = out / ("checkpoint_epoch" + std::to_string(epoch) + ".apck");
    save_model(ckpt, trainer.model());
    std::cout << "epoch " << epoch << " -> " << ckpt.string() << '\n';
  });
  save_model(out / "model.apck", trainer.model());
  std::ostringstream loss;
  write_loss_csv(loss, reports);
  write_text(out / "loss.csv", loss.str());

  const EvalReport final_report = evaluate(predict(trainer.model(), split.test));
  write_text(out / "report.csv", report_csv(final_report));
  std::ostringstream text;
  text << "held-out subject " << c.held_out << "\n\nmodel\n" << report_text(final_report) << "\nmean-pose baseline\n"
       << report_text(baseline) << "\nuntrained model\n" << report_text(untrained);
  write_text(out / "report.txt", text.str());
  std::cout << text.str();
  return kOk;
}

int cmd_eval(RunConfig c, const std::string& checkpoint, const std::string& dataset, const std::string& side) {
  TrainedModel model = load_model(checkpoint);
  if (model.estimator.bands() != static_cast<int>(c.b)) throw FormatError("checkpoint band count differs from b");
  c.alphas.clear();
  const auto held = static_cast<std::uint16_t>(c.held_out);
  const auto recordings = load_recordings(c, dataset, held);
  const LosoSplit split = split_loso(recordings, held);
  const EvalReport r = evaluate(predict(model, side == "train" ? split.train : split.test));
  const fs::path out = c.out;
  write_text(out / ("eval_" + side + ".csv"), report_csv(r));
  write_text(out / ("eval_" + side + ".txt"), report_text(r));
  std::cout << report_text(r);
  return kOk;
}

int cmd_plot(RunConfig c, const std::string& kind, const std::string& checkpoint, const std::string& loss_csv,
             const std::string& output, int frames) {
  std::string svg;
  if (kind == "pca") {
    const fs::path dir = c.corpus;
    const DatasetFile data = deserialize_dataset(dir / "dataset.apds");
    const DatasetFile empty = deserialize_dataset(dir / "empty_room.apds");
    std::vector<int> classes;
    std::vector<std::string> names{"empty room"};
    std::map<int, int> anchor_class;
    for (double a : kDistanceAnchorsCm) {
      anchor_class[static_cast<int>(a)] = static_cast<int>(names.size());
      names.push_back(std::to_string(static_cast<int>(a)) + " cm");
    }
    const auto rows = empty.frames.size() + data.frames.size();
    const Eigen::Index d = static_cast<Eigen::Index>(data.header.bands) * kFeatureChannels;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), d);
    Eigen::Index r = 0;
    for (const auto* file : {&empty, &data})
      for (const auto& f : file->frames) {
        x.row(r++) = Eigen::Map<const Eigen::RowVectorXf>(f.feature.data(), d).cast<double>();
        classes.push_back(file == &empty ? 0
                                         : anchor_class[static_cast<int>(kDistanceAnchorsCm[nearest_anchor(f.distance_cm)])]);
      }
    svg = svg_scatter(pca_project(x, 2).points, classes, names, "PCA of acoustic features");
  } else if (kind == "skeleton") {
    TrainedModel model = load_model(checkpoint);
    c.alphas.clear();
    const auto held = static_cast<std::uint16_t>(c.held_out);
    const auto recordings = load_recordings(c, "", held);
    const LosoSplit split = split_loso(recordings, held);
    Prediction p = predict(model, {split.test.front()});
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(std::max(frames, 1)), p.pred.size());
    p.pred.resize(count);
    p.gt.resize(count);
    svg = svg_skeletons(p.gt, p.pred, "truth (left) vs prediction (right)");
  } else if (kind == "loss") {
    std::ifstream in(loss_csv);
    if (!in) throw std::runtime_error("cannot open " + loss_csv);
    std::stringstream ss;
    ss << in.rdbuf();
    svg = svg_loss_curves(read_loss_csv(ss.str()), "training losses");
  } else {
    throw UsageError("--kind must be pca, skeleton or loss");
  }
  const fs::path path = output.empty() ? fs::path(c.out) / (kind + ".svg") : fs::path(output);
  write_text(path, svg);
  std::cout << "wrote " << path.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic human pose estimation: synthesis, training and evaluation"};
  app.require_subcommand(1);

  std::map<std::string, ConfigOptions> options;
  const auto sub = [&](const char* name, const char* help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    options[name].attach(cmd);
    return cmd;
  };

  std::string wav, csv, output, dataset, checkpoint, loss_csv, kind, side = "test";
  int frames = 8;

  sub("synth", "render a synthetic corpus");
  CLI::App* ingest = sub("ingest", "extract features from a WAV/CSV pair into a dataset file");
  CLI::App* augment = sub("augment", "ingest with phase-shift augmentation");
  for (CLI::App* cmd : {ingest, augment}) {
    cmd->add_option("--wav", wav, "4-channel float WAV")->required();
    cmd->add_option("--csv", csv, "pose CSV")->required();
    cmd->add_option("--output", output, "dataset file")->required();
  }
  CLI::App* train = sub("train", "leave-one-subject-out training");
  train->add_option("--dataset", dataset, "train from a dataset file instead of the corpus (no augmentation)");
  CLI::App* eval = sub("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", dataset, "evaluate on a dataset file instead of the corpus");
  eval->add_option("--split", side, "test or train")->check(CLI::IsMember({"test", "train"}));
  CLI::App* plot = sub("plot", "render SVG diagnostics");
  plot->add_option("--kind", kind, "pca, skeleton or loss")->required()->check(CLI::IsMember({"pca", "skeleton", "loss"}));
  plot->add_option("--checkpoint", checkpoint, "checkpoint for skeleton plots");
  plot->add_option("--loss-csv", loss_csv, "loss CSV for loss plots");
  plot->add_option("--output", output, "SVG path (default <out>/<kind>.svg)");
  plot->add_option("--frames", frames, "frames in a skeleton plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    const ConfigOptions& opt = options.at(name);
    const RunConfig c = opt.resolve();
    if (opt.print) {
      std::cout << dump_config(c);
      return kOk;
    }
    if (name == "synth") return cmd_synth(c);
    if (name == "ingest") return cmd_ingest(c, wav, csv, output, false);
    if (name == "augment") return cmd_ingest(c, wav, csv, output, true);
    if (name == "train") return cmd_train(c, dataset);
    if (name == "eval") return cmd_eval(c, checkpoint, dataset, side);
    if (name == "plot") return cmd_plot(c, kind, checkpoint, loss_csv, output, frames);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
