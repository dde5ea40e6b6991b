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
#include <map>
#include <ostream>
#include <vector>

#include "apose/skeleton.hpp"

namespace apose {

using PoseSequence = std::vector<PoseFrame>;

/// Root of the mean squared coordinate error over all F x 21 x 3 values.
double rmse(const PoseSequence& pred, const PoseSequence& gt);
/// Mean absolute coordinate error.
double mae(const PoseSequence& pred, const PoseSequence& gt);

struct PckhResult {
  double value = 0.0;
  std::size_t skipped_frames = 0;  // frames whose head-neck distance is zero
};

/// Fraction of joints within ratio * |head - neck| of the truth (boundary counts as correct).
/// Throws std::invalid_argument when every frame is degenerate.
PckhResult pckh(const PoseSequence& pred, const PoseSequence& gt, double ratio = 0.5);

struct MetricSet {
  double rmse = 0.0;
  double mae = 0.0;
  double pckh05 = 0.0;
  std::size_t frame_count = 0;
};

struct EvalReport {
  MetricSet pooled;
  std::map<int, MetricSet> per_distance;  // keyed by nearest anchor in cm
  std::size_t skipped_frames = 0;
};

/// Pooled metrics plus one group per nearest distance anchor.
EvalReport per_position_report(const PoseSequence& pred, const PoseSequence& gt, const std::vector<double>& distances_cm);

/// `group,frames,rmse,mae,pckh05` with a `pooled` row first.
void write_report_csv(std::ostream& out, const EvalReport& report);
void write_report_text(std::ostream& out, const EvalReport& report);

}  // namespace apose
