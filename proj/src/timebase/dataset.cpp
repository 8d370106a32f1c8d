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

#include <charconv>
#include <cmath>
#include <string>

#include "tk/error.hpp"
#include "tk/timebase.hpp"

namespace tk::timebase {

std::string_view role_name(ComponentRole role) {
  switch (role) {
    case ComponentRole::Input: return "input";
    case ComponentRole::Output: return "output";
    case ComponentRole::Both: return "both";
  }
  return "both";
}

ComponentRole parse_role(std::string_view text) {
  if (text == "input") return ComponentRole::Input;
  if (text == "output") return ComponentRole::Output;
  if (text == "both") return ComponentRole::Both;
  fail(ErrorKind::InvalidArgument, "unknown component role '" + std::string(text) +
                                       "' (expected input, output or both)");
}

std::size_t TimeSeriesDataset::n_total() const {
  std::size_t n = 0;
  for (const Slice& s : slices) n += s.length();
  return n;
}

std::size_t TimeSeriesDataset::component_index(std::string_view wanted) const {
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (components[i].name == wanted) return i;
  }
  fail(ErrorKind::MissingComponent, "dataset '" + name + "' has no component '" +
                                        std::string(wanted) + "'");
}

std::size_t TimeSeriesDataset::slice_offset(std::size_t s) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s; ++i) n += slices[i].length();
  return n;
}

namespace {

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (begin == end || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    fail(ErrorKind::NonNumericValue, "row " + std::to_string(row + 1) + ", column '" + column +
                                         "': '" + cell + "' is not a finite number");
  }
  return value;
}

}  // namespace

TimeSeriesDataset import_dataset(const RawTable& table, const DatasetMeta& meta) {
  if (meta.delta_seconds <= 0) {
    fail(ErrorKind::InvalidArgument, "dataset metadata must declare a positive delta_seconds");
  }
  if (meta.components.empty()) {
    fail(ErrorKind::InvalidArgument, "dataset metadata declares no components");
  }
  if (table.timestamps.empty()) fail(ErrorKind::InvalidArgument, "table has no rows");
  if (table.cells.size() != table.timestamps.size()) {
    fail(ErrorKind::InvalidArgument, "table row count mismatch");
  }

  std::vector<std::size_t> source_column;
  for (const Component& c : meta.components) {
    std::size_t found = table.columns.size();
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      if (table.columns[j] == c.name) found = j;
    }
    if (found == table.columns.size()) {
      fail(ErrorKind::MissingComponent, "declared component '" + c.name + "' not in table");
    }
    source_column.push_back(found);
  }

  const Timestamp origin = table.timestamps.front();
  for (std::size_t r = 0; r < table.timestamps.size(); ++r) {
    const Timestamp ts = table.timestamps[r];
    if (r > 0 && ts <= table.timestamps[r - 1]) {
      fail(ErrorKind::NonMonotonicTimestamps,
           "row " + std::to_string(r + 1) + ": timestamp " + format_iso8601(ts) +
               " does not follow " + format_iso8601(table.timestamps[r - 1]));
    }
    if ((ts - origin) % meta.delta_seconds != 0) {
      fail(ErrorKind::OffGridTimestamp,
           "row " + std::to_string(r + 1) + ": timestamp " + format_iso8601(ts) +
               " is not a multiple of " + std::to_string(meta.delta_seconds) +
               "s from the series start");
    }
  }

  TimeSeriesDataset ds;
  ds.name = meta.name;
  ds.components = meta.components;
  ds.delta = meta.delta_seconds;

  const std::size_t nc = meta.components.size();
  std::size_t start = 0;
  const std::size_t n = table.timestamps.size();
  for (std::size_t r = 1; r <= n; ++r) {
    const bool boundary = r == n || table.timestamps[r] - table.timestamps[r - 1] != meta.delta_seconds;
    if (!boundary) continue;
    Slice slice;
    slice.start_ts = table.timestamps[start];
    slice.values = Matrix(r - start, nc);
    slice.synthetic.assign(r - start, false);
    for (std::size_t i = start; i < r; ++i) {
      const auto& row = table.cells[i];
      for (std::size_t c = 0; c < nc; ++c) {
        if (source_column[c] >= row.size()) {
          fail(ErrorKind::NonNumericValue, "row " + std::to_string(i + 1) + ": missing value for '" +
                                               meta.components[c].name + "'");
        }
        slice.values(i - start, c) = parse_number(row[source_column[c]], i, meta.components[c].name);
      }
    }
    ds.slices.push_back(std::move(slice));
    start = r;
  }
  return ds;
}

TimeSeriesDataset interpolate_gaps(const TimeSeriesDataset& ds, std::size_t max_gap,
                                   InterpolationMethod method) {
  if (max_gap < 1) fail(ErrorKind::InvalidArgument, "max_gap must be >= 1");
  TimeSeriesDataset out = ds;
  out.slices.clear();
  const std::size_t nc = ds.n_components();
  for (const Slice& next : ds.slices) {
    if (out.slices.empty()) {
      out.slices.push_back(next);
      continue;
    }
    Slice& prev = out.slices.back();
    const Timestamp prev_end = prev.start_ts + static_cast<Timestamp>(prev.length()) * ds.delta;
    const auto missing = static_cast<std::size_t>((next.start_ts - prev_end) / ds.delta);
    if (missing > max_gap) {
      out.slices.push_back(next);
      continue;
    }
    const std::size_t merged_len = prev.length() + missing + next.length();
    Matrix values(merged_len, nc);
    std::vector<bool> synthetic(merged_len, false);
    for (std::size_t r = 0; r < prev.length(); ++r) {
      for (std::size_t c = 0; c < nc; ++c) values(r, c) = prev.values(r, c);
      synthetic[r] = prev.synthetic[r];
    }
    const std::size_t last = prev.length() - 1;
    for (std::size_t s = 1; s <= missing; ++s) {
      const std::size_t r = last + s;
      for (std::size_t c = 0; c < nc; ++c) {
        const double from = prev.values(last, c);
        const double to = next.values(0, c);
        values(r, c) = method == InterpolationMethod::Hold
                           ? from
                           : from + (to - from) * static_cast<double>(s) /
                                        static_cast<double>(missing + 1);
      }
      synthetic[r] = true;
    }
    const std::size_t base = prev.length() + missing;
    for (std::size_t r = 0; r < next.length(); ++r) {
      for (std::size_t c = 0; c < nc; ++c) values(base + r, c) = next.values(r, c);
      synthetic[base + r] = next.synthetic[r];
    }
    prev.values = std::move(values);
    prev.synthetic = std::move(synthetic);
  }
  return out;
}

}  // namespace tk::timebase
