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

#include <string>
#include <vector>

#include <Eigen/Core>

#include "apose/metrics.hpp"
#include "apose/model.hpp"

namespace apose {

/// 2-D scatter of `points` (N x 2) colored by `classes[i]`, one legend entry per name.
std::string svg_scatter(const Eigen::MatrixXd& points, const std::vector<int>& classes,
                        const std::vector<std::string>& class_names, const std::string& title);

/// Side-by-side front-view stick figures (truth left, prediction right) for each frame.
std::string svg_skeletons(const PoseSequence& gt, const PoseSequence& pred, const std::string& title);

/// One polyline per loss column over the step axis.
std::string svg_loss_curves(const std::vector<LossReport>& reports, const std::string& title);

/// Parses the `step,l_pose,l_smooth,l_std,l_disc_ce,total` CSV.
std::vector<LossReport> read_loss_csv(const std::string& text);

}  // namespace apose
