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

#include "apose/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "apose/errors.hpp"

namespace apose {

namespace {

constexpr std::array<const char*, 8> kPalette{"#4c4c4c", "#1f77b4", "#ff7f0e", "#2ca02c",
                                              "#d62728", "#9467bd", "#8c564b", "#e377c2"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Canvas {
  double width, height;
  std::ostringstream body;

  Canvas(double w, double h, const std::string& title) : width(w), height(h) {
    body << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
         << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         << "<text x=\"" << num(w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
         << "</text>\n";
  }
  std::string finish() {
    body << "</svg>\n";
    return body.str();
  }
};

// Maps [lo, hi] onto [a, b], guarding degenerate ranges.
struct Axis {
  double lo, hi, a, b;
  double operator()(double v) const { return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : (a + b) / 2; }
};

Axis padded(double lo, double hi, double a, double b) {
  const double pad = hi > lo ? 0.05 * (hi - lo) : 1.0;
  return {lo - pad, hi + pad, a, b};
}

}  // namespace

std::string svg_scatter(const Eigen::MatrixXd& points, const std::vector<int>& classes,
                        const std::vector<std::string>& class_names, const std::string& title) {
  if (points.cols() != 2 || static_cast<std::size_t>(points.rows()) != classes.size())
    throw std::invalid_argument("scatter: need N x 2 points and one class per point");
  Canvas c(640, 520, title);
  const double left = 60, right = 480, top = 40, bottom = 480;
  const Axis x = padded(points.col(0).minCoeff(), points.col(0).maxCoeff(), left, right);
  const Axis y = padded(points.col(1).minCoeff(), points.col(1).maxCoeff(), bottom, top);
  c.body << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
         << num(bottom - top) << "\" fill=\"none\" stroke=\"#999\"/>\n";
  c.body << "<text x=\"" << num((left + right) / 2) << "\" y=\"505\" text-anchor=\"middle\">PC1</text>\n";
  c.body << "<text x=\"20\" y=\"" << num((top + bottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
         << num((top + bottom) / 2) << ")\">PC2</text>\n";
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int k = classes[static_cast<std::size_t>(i)];
    c.body << "<circle cx=\"" << num(x(points(i, 0))) << "\" cy=\"" << num(y(points(i, 1)))
           << "\" r=\"2\" fill-opacity=\"0.6\" fill=\"" << kPalette[static_cast<std::size_t>(k) % kPalette.size()]
           << "\"/>\n";
  }
  for (std::size_t k = 0; k < class_names.size(); ++k) {
    const double ly = top + 10 + 20 * static_cast<double>(k);
    c.body << "<circle cx=\"500\" cy=\"" << num(ly) << "\" r=\"5\" fill=\"" << kPalette[k % kPalette.size()]
           << "\"/><text x=\"512\" y=\"" << num(ly + 4) << "\">" << escape(class_names[k]) << "</text>\n";
  }
  return c.finish();
}

std::string svg_skeletons(const PoseSequence& gt, const PoseSequence& pred, const std::string& title) {
  if (gt.size() != pred.size() || gt.empty()) throw std::invalid_argument("skeletons: need equal, non-empty sequences");
  const double cell = 160, pad = 10;
  Canvas c(cell * 2 + 2 * pad, 40 + cell * static_cast<double>(gt.size()), title);
  double xlo = 1e300, xhi = -1e300, zlo = 1e300, zhi = -1e300;
  for (const auto* seq : {&gt, &pred})
    for (const auto& p : *seq) {
      xlo = std::min(xlo, p.col(0).minCoeff());
      xhi = std::max(xhi, p.col(0).maxCoeff());
      zlo = std::min(zlo, p.col(2).minCoeff());
      zhi = std::max(zhi, p.col(2).maxCoeff());
    }
  const double span = std::max({xhi - xlo, zhi - zlo, 1e-6}) * 1.1;
  const double cx = (xlo + xhi) / 2, cz = (zlo + zhi) / 2;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    for (int side = 0; side < 2; ++side) {
      const PoseFrame& p = side == 0 ? gt[f] : pred[f];
      const double ox = pad + side * cell, oy = 30 + cell * static_cast<double>(f);
      const auto px = [&](double v) { return ox + cell / 2 + (v - cx) / span * (cell - 20); };
      const auto py = [&](double v) { return oy + cell / 2 - (v - cz) / span * (cell - 20); };
      const char* color = side == 0 ? "#2ca02c" : "#d62728";
      for (const auto& [a, b] : skeleton_bones())
        c.body << "<line x1=\"" << num(px(p(a, 0))) << "\" y1=\"" << num(py(p(a, 2))) << "\" x2=\"" << num(px(p(b, 0)))
               << "\" y2=\"" << num(py(p(b, 2))) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      for (int j = 0; j < kNumJoints; ++j)
        c.body << "<circle cx=\"" << num(px(p(j, 0))) << "\" cy=\"" << num(py(p(j, 2))) << "\" r=\"2\" fill=\"" << color
               << "\"/>\n";
    }
  }
  return c.finish();
}

std::string svg_loss_curves(const std::vector<LossReport>& reports, const std::string& title) {
  if (reports.empty()) throw std::invalid_argument("loss plot: no rows");
  Canvas c(720, 440, title);
  const double left = 60, right = 560, top = 40, bottom = 400;
  using Getter = double (*)(const LossReport&);
  const std::array<std::pair<const char*, Getter>, 5> series{{
      {"l_pose", [](const LossReport& r) { return r.l_pose; }},
      {"l_smooth", [](const LossReport& r) { return r.l_smooth; }},
      {"l_std", [](const LossReport& r) { return r.l_std; }},
      {"l_disc_ce", [](const LossReport& r) { return r.l_disc_ce; }},
      {"total", [](const LossReport& r) { return r.total; }},
  }};
  double lo = 1e300, hi = -1e300;
  for (const auto& r : reports)
    for (const auto& s : series) {
      lo = std::min(lo, s.second(r));
      hi = std::max(hi, s.second(r));
    }
  const Axis x = padded(static_cast<double>(reports.front().step), static_cast<double>(reports.back().step), left, right);
  const Axis y = padded(lo, hi, bottom, top);
  c.body << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
         << num(bottom - top) << "\" fill=\"none\" stroke=\"#999\"/>\n";
  c.body << "<text x=\"" << num((left + right) / 2) << "\" y=\"430\" text-anchor=\"middle\">step</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    c.body << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[k + 1] << "\" points=\"";
    for (std::size_t i = 0; i < reports.size(); ++i)
      c.body << (i ? " " : "") << num(x(static_cast<double>(reports[i].step))) << ',' << num(y(series[k].second(reports[i])));
    c.body << "\"/>\n";
    const double ly = top + 10 + 20 * static_cast<double>(k);
    c.body << "<line x1=\"575\" y1=\"" << num(ly) << "\" x2=\"595\" y2=\"" << num(ly) << "\" stroke=\"" << kPalette[k + 1]
           << "\" stroke-width=\"2\"/><text x=\"600\" y=\"" << num(ly + 4) << "\">" << series[k].first << "</text>\n";
  }
  return c.finish();
}

std::vector<LossReport> read_loss_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,", 0) != 0) throw FormatError("loss CSV: missing header");
  std::vector<LossReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossReport r;
    char comma[5];
    std::istringstream row(line);
    row >> r.step >> comma[0] >> r.l_pose >> comma[1] >> r.l_smooth >> comma[2] >> r.l_std >> comma[3] >> r.l_disc_ce >>
        comma[4] >> r.total;
    if (!row || std::any_of(comma, comma + 5, [](char ch) { return ch != ','; }))
      throw FormatError("loss CSV: malformed row '" + line + "'");
    out.push_back(r);
  }
  return out;
}

}  // namespace apose
