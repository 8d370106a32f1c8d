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
#include <string_view>
#include <vector>

#include "tk/matrix.hpp"

namespace tk {

// Splits one CSV record. Double-quoted fields may contain commas and "".
std::vector<std::string> split_csv_line(std::string_view line);

// Matrix as CSV with a header row; values printed with round-trip precision.
std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header,
                          const std::vector<std::string>& row_labels = {});
// Inverse of matrix_to_csv (drops the header and, if present, the label column).
Matrix matrix_from_csv(const std::string& text, bool has_row_labels);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace tk
