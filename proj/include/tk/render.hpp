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

#pragma once

#include <string>
#include <vector>

#include "tk/matrix.hpp"

namespace tk::render {

enum class ColorScale {
  Diverging,   // signed values, white at zero
  Sequential,  // non-negative values
};

// One <rect class="cell"> per matrix entry; rows are drawn top to bottom.
std::string heatmap_svg(const Matrix& m, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, ColorScale scale,
                        const std::string& title);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string css_class = "series";
  bool dashed = false;
};

// One <polyline> per series, classed by css_class, plus a legend.
std::string line_chart_svg(const std::vector<Series>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label);

std::string confusion_svg(const std::vector<std::vector<std::size_t>>& confusion,
                          const std::string& title);

// Errors: IOFailure.
void write_file(const std::string& path, const std::string& content);

}  // namespace tk::render
