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

#include "tk/csv.hpp"

#include <charconv>
#include <sstream>

#include "tk/error.hpp"

namespace tk {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r' && ch != '\n') {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header,
                          const std::vector<std::string>& row_labels) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    bool first = true;
    if (!row_labels.empty()) {
      out << row_labels[r];
      first = false;
    }
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out << (first ? "" : ",") << format_double(m(r, c));
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

Matrix matrix_from_csv(const std::string& text, bool has_row_labels) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    const std::size_t skip = has_row_labels ? 1 : 0;
    if (fields.size() < skip) fail(ErrorKind::InvalidArgument, "malformed CSV row");
    const std::size_t n = fields.size() - skip;
    if (rows == 0) cols = n;
    if (n != cols) fail(ErrorKind::InvalidArgument, "ragged CSV matrix");
    for (std::size_t i = skip; i < fields.size(); ++i) {
      double v = 0.0;
      const auto& f = fields[i];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        fail(ErrorKind::NonNumericValue, "CSV cell '" + f + "' is not numeric");
      }
      values.push_back(v);
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

}  // namespace tk
