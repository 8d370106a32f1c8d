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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tk/csv.hpp"
#include "tk/digest.hpp"
#include "tk/error.hpp"
#include "tk/timebase.hpp"

namespace tk::timebase {

namespace fs = std::filesystem;
using nlohmann::json;

RawTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IOFailure, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::InvalidArgument, "'" + path + "' is empty");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "timestamp") {
    fail(ErrorKind::InvalidArgument, "'" + path + "': first column must be 'timestamp'");
  }
  RawTable table;
  table.columns.assign(header.begin() + 1, header.end());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto fields = split_csv_line(line);
    auto ts = parse_iso8601(fields[0]);
    if (!ts) {
      fail(ErrorKind::InvalidArgument, "row " + std::to_string(row) + ": malformed timestamp '" +
                                           fields[0] + "'");
    }
    if (fields.size() != header.size()) {
      fail(ErrorKind::NonNumericValue, "row " + std::to_string(row) + ": expected " +
                                           std::to_string(header.size()) + " fields, got " +
                                           std::to_string(fields.size()));
    }
    table.timestamps.push_back(*ts);
    table.cells.emplace_back(fields.begin() + 1, fields.end());
  }
  return table;
}

std::string dataset_digest(const TimeSeriesDataset& ds) {
  Digester d;
  d.update(ds.name).update("\n").update(std::to_string(ds.delta)).update("\n");
  for (const Component& c : ds.components) {
    d.update(c.name).update(":").update(role_name(c.role)).update("\n");
  }
  for (const Slice& s : ds.slices) {
    d.update(std::to_string(s.start_ts)).update("/").update(std::to_string(s.length())).update("\n");
    d.update(s.values.values());
    std::string flags(s.synthetic.size(), '0');
    for (std::size_t i = 0; i < s.synthetic.size(); ++i) flags[i] = s.synthetic[i] ? '1' : '0';
    d.update(flags);
  }
  return d.hex();
}

void save_dataset(const TimeSeriesDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "tk-dataset-1";
  manifest["name"] = ds.name;
  manifest["delta_seconds"] = ds.delta;
  manifest["components"] = json::array();
  for (const Component& c : ds.components) {
    manifest["components"].push_back({{"name", c.name}, {"role", role_name(c.role)}});
  }
  manifest["slices"] = json::array();
  for (const Slice& s : ds.slices) {
    std::vector<std::size_t> synthetic;
    for (std::size_t i = 0; i < s.synthetic.size(); ++i)
      if (s.synthetic[i]) synthetic.push_back(i);
    manifest["slices"].push_back({{"start", format_iso8601(s.start_ts)},
                                  {"start_ts", s.start_ts},
                                  {"length", s.length()},
                                  {"synthetic_rows", synthetic}});
  }
  manifest["n_total"] = ds.n_total();
  manifest["columns_file"] = "columns.bin";
  manifest["layout"] = "float64 little-endian, component-major over concatenated slices";
  manifest["digest"] = dataset_digest(ds);

  std::ofstream bin(fs::path(dir) / "columns.bin", std::ios::binary);
  if (!bin) fail(ErrorKind::IOFailure, "cannot write dataset columns in '" + dir + "'");
  for (std::size_t c = 0; c < ds.n_components(); ++c)
    for (const Slice& s : ds.slices)
      for (std::size_t r = 0; r < s.length(); ++r) {
        const double v = s.values(r, c);
        bin.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  if (!bin) fail(ErrorKind::IOFailure, "short write of dataset columns in '" + dir + "'");

  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) fail(ErrorKind::IOFailure, "cannot write dataset manifest in '" + dir + "'");
}

TimeSeriesDataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) fail(ErrorKind::NotFound, "no dataset manifest in '" + dir + "'");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    fail(ErrorKind::IOFailure, "corrupt dataset manifest in '" + dir + "': " + e.what());
  }
  TimeSeriesDataset ds;
  ds.name = manifest.at("name").get<std::string>();
  ds.delta = manifest.at("delta_seconds").get<std::int64_t>();
  for (const auto& c : manifest.at("components")) {
    ds.components.push_back({c.at("name").get<std::string>(),
                             parse_role(c.at("role").get<std::string>())});
  }
  const std::size_t nc = ds.components.size();
  for (const auto& s : manifest.at("slices")) {
    Slice slice;
    slice.start_ts = s.at("start_ts").get<Timestamp>();
    const auto len = s.at("length").get<std::size_t>();
    slice.values = Matrix(len, nc);
    slice.synthetic.assign(len, false);
    for (auto r : s.at("synthetic_rows")) slice.synthetic.at(r.get<std::size_t>()) = true;
    ds.slices.push_back(std::move(slice));
  }
  std::ifstream bin(fs::path(dir) / "columns.bin", std::ios::binary);
  if (!bin) fail(ErrorKind::IOFailure, "missing dataset columns in '" + dir + "'");
  for (std::size_t c = 0; c < nc; ++c)
    for (Slice& s : ds.slices)
      for (std::size_t r = 0; r < s.length(); ++r) {
        double v = 0.0;
        bin.read(reinterpret_cast<char*>(&v), sizeof v);
        s.values(r, c) = v;
      }
  if (!bin) fail(ErrorKind::IOFailure, "truncated dataset columns in '" + dir + "'");
  if (dataset_digest(ds) != manifest.at("digest").get<std::string>()) {
    fail(ErrorKind::IOFailure, "dataset in '" + dir + "' does not match its recorded digest");
  }
  return ds;
}

}  // namespace tk::timebase
