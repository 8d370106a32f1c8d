/*
 * Copyright 2026 The tk Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tk/error.hpp"
#include "tk/render.hpp"

namespace tk::render {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string rgb(int r, int g, int b) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", std::clamp(r, 0, 255), std::clamp(g, 0, 255),
                std::clamp(b, 0, 255));
  return buf;
}

std::string color(double v, double scale, ColorScale kind) {
  const double t = scale > 0 && std::isfinite(v) ? std::clamp(v / scale, -1.0, 1.0) : 0.0;
  if (kind == ColorScale::Sequential) {
    const double u = std::max(t, 0.0);
    return rgb(static_cast<int>(std::lround(255 - 227 * u)), static_cast<int>(std::lround(255 - 155 * u)),
               static_cast<int>(std::lround(255 - 75 * u)));
  }
  if (t >= 0) {
    return rgb(255, static_cast<int>(std::lround(255 - 200 * t)), static_cast<int>(std::lround(255 - 200 * t)));
  }
  return rgb(static_cast<int>(std::lround(255 + 200 * t)), static_cast<int>(std::lround(255 + 200 * t)), 255);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string heatmap_svg(const Matrix& m, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, ColorScale scale,
                        const std::string& title) {
  const double cell = 36, left = 90, top = 50;
  const double width = left + cell * static_cast<double>(m.cols()) + 110;
  const double height = top + cell * static_cast<double>(m.rows()) + 70;
  double extent = 0.0;
  for (double v : m.values()) {
    if (std::isfinite(v)) extent = std::max(extent, std::abs(v));
  }
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
    << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text class=\"title\" x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double x = left + cell * static_cast<double>(c), y = top + cell * static_cast<double>(r);
      s << "<rect class=\"cell\" x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cell)
        << "\" height=\"" << num(cell) << "\" fill=\"" << color(m(r, c), extent, scale)
        << "\" stroke=\"#ffffff\"><title>" << label_num(m(r, c)) << "</title></rect>\n";
    }
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const std::string text = r < row_labels.size() ? row_labels[r] : std::to_string(r);
    s << "<text class=\"row-label\" x=\"" << num(left - 6) << "\" y=\""
      << num(top + cell * (static_cast<double>(r) + 0.5) + 4) << "\" text-anchor=\"end\">" << escape(text)
      << "</text>\n";
  }
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const std::string text = c < col_labels.size() ? col_labels[c] : std::to_string(c);
    s << "<text class=\"col-label\" x=\"" << num(left + cell * (static_cast<double>(c) + 0.5)) << "\" y=\""
      << num(top + cell * static_cast<double>(m.rows()) + 16) << "\" text-anchor=\"middle\">"
      << escape(text) << "</text>\n";
  }
  const double lx = left + cell * static_cast<double>(m.cols()) + 20;
  const double lo = scale == ColorScale::Diverging ? -extent : 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double v = extent - (extent - lo) * i / 10.0;
    s << "<rect class=\"legend\" x=\"" << num(lx) << "\" y=\"" << num(top + 10.0 * i) << "\" width=\"14\" height=\"10\" fill=\""
      << color(v, extent, scale) << "\"/>\n";
  }
  s << "<text x=\"" << num(lx + 18) << "\" y=\"" << num(top + 8) << "\">" << label_num(extent) << "</text>\n";
  s << "<text x=\"" << num(lx + 18) << "\" y=\"" << num(top + 108) << "\">" << label_num(lo) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string line_chart_svg(const std::vector<Series>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label) {
  const double width = 640, height = 400, left = 70, right = 150, top = 40, bottom = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text class=\"title\" x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  s << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"#444444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    s << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 15) << "\" text-anchor=\"middle\">"
      << label_num(xv) << "</text>\n";
    s << "<text x=\"" << num(left - 5) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">"
      << label_num(yv) << "</text>\n";
  }
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height - 10) << "\" text-anchor=\"middle\">"
    << escape(x_label) << "</text>\n";
  s << "<text x=\"15\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
    << num(top + ph / 2) << ")\">" << escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& ser = series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    s << "<polyline class=\"" << escape(ser.css_class) << "\" data-name=\"" << escape(ser.name)
      << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\""
      << (ser.dashed ? " stroke-dasharray=\"4 3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
      if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) continue;
      s << num(px(ser.x[i])) << ',' << num(py(ser.y[i])) << ' ';
    }
    s << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(k) + 8;
    s << "<line x1=\"" << num(width - right + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(width - right + 30)
      << "\" y2=\"" << num(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << num(width - right + 35) << "\" y=\"" << num(ly + 4) << "\">" << escape(ser.name)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string confusion_svg(const std::vector<std::vector<std::size_t>>& confusion, const std::string& title) {
  const std::size_t k = confusion.size();
  Matrix m(k, k);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < k; ++i) {
    labels.push_back(std::to_string(i));
    for (std::size_t j = 0; j < k; ++j) m(i, j) = static_cast<double>(confusion[i][j]);
  }
  std::vector<std::string> rows, cols;
  for (const auto& l : labels) {
    rows.push_back("true " + l);
    cols.push_back("pred " + l);
  }
  return heatmap_svg(m, rows, cols, ColorScale::Sequential, title);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) fail(ErrorKind::IOFailure, "cannot write " + path);
}

}  // namespace tk::render
