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

#include "apose/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>
#include <string>

#include "apose/model.hpp"

namespace apose {

namespace {

void check_pair(const PoseSequence& pred, const PoseSequence& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("metric: prediction and truth lengths differ");
  if (pred.empty()) throw std::invalid_argument("metric: empty sequence");
}

}  // namespace

double rmse(const PoseSequence& pred, const PoseSequence& gt) {
  check_pair(pred, gt);
  double acc = 0.0;
  for (std::size_t f = 0; f < pred.size(); ++f) acc += (pred[f] - gt[f]).squaredNorm();
  return std::sqrt(acc / static_cast<double>(pred.size() * kPoseDims));
}

double mae(const PoseSequence& pred, const PoseSequence& gt) {
  check_pair(pred, gt);
  double acc = 0.0;
  for (std::size_t f = 0; f < pred.size(); ++f) acc += (pred[f] - gt[f]).cwiseAbs().sum();
  return acc / static_cast<double>(pred.size() * kPoseDims);
}

PckhResult pckh(const PoseSequence& pred, const PoseSequence& gt, double ratio) {
  check_pair(pred, gt);
  PckhResult r;
  std::size_t correct = 0, total = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const double h = (gt[f].row(kHead) - gt[f].row(kNeck)).norm();
    if (h == 0.0) {
      ++r.skipped_frames;
      continue;
    }
    for (int j = 0; j < kNumJoints; ++j) correct += (pred[f].row(j) - gt[f].row(j)).norm() <= ratio * h;
    total += kNumJoints;
  }
  if (total == 0) throw std::invalid_argument("pckh: every frame has zero head-neck distance");
  r.value = static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

static MetricSet metric_set(const PoseSequence& pred, const PoseSequence& gt, std::size_t& skipped) {
  const PckhResult p = pckh(pred, gt, 0.5);
  skipped += p.skipped_frames;
  return {rmse(pred, gt), mae(pred, gt), p.value, pred.size()};
}

EvalReport per_position_report(const PoseSequence& pred, const PoseSequence& gt, const std::vector<double>& distances_cm) {
  check_pair(pred, gt);
  if (distances_cm.size() != pred.size()) throw std::invalid_argument("report: one distance per frame required");
  std::map<int, std::pair<PoseSequence, PoseSequence>> groups;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    auto& g = groups[static_cast<int>(kDistanceAnchorsCm[nearest_anchor(distances_cm[f])])];
    g.first.push_back(pred[f]);
    g.second.push_back(gt[f]);
  }
  EvalReport report;
  report.pooled = metric_set(pred, gt, report.skipped_frames);
  std::size_t ignored = 0;
  for (const auto& [anchor, g] : groups) report.per_distance[anchor] = metric_set(g.first, g.second, ignored);
  return report;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  const auto row = [&](const std::string& name, const MetricSet& m) {
    out << name << ',' << m.frame_count << ',' << std::setprecision(9) << m.rmse << ',' << m.mae << ',' << m.pckh05
        << '\n';
  };
  out << "group,frames,rmse,mae,pckh05\n";
  row("pooled", report.pooled);
  for (const auto& [anchor, m] : report.per_distance) row(std::to_string(anchor) + "cm", m);
}

void write_report_text(std::ostream& out, const EvalReport& report) {
  const auto line = [&](const std::string& name, const MetricSet& m) {
    out << std::left << std::setw(8) << name << std::right << std::fixed << std::setprecision(4) << "  rmse "
        << m.rmse << " m  mae " << m.mae << " m  pckh@0.5 " << m.pckh05 << "  (" << m.frame_count << " frames)\n";
  };
  line("all", report.pooled);
  for (const auto& [anchor, m] : report.per_distance) line(std::to_string(anchor) + " cm", m);
  if (report.skipped_frames) out << report.skipped_frames << " frame(s) skipped for zero head-neck distance\n";
  out.unsetf(std::ios::floatfield);
}

}  // namespace apose
