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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tk/timebase.hpp"

namespace tk::exp {

inline constexpr const char* kVersion = "0.1.0";

// Layout of an experiment root directory.
struct Paths {
  std::filesystem::path root;

  std::filesystem::path datasets() const { return root / "custom_datasets"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path archs() const { return root / "custom_archs"; }
  std::filesystem::path runs_log() const { return root / "runs.jsonl"; }
  std::filesystem::path lock_file() const { return root / ".tk.lock"; }
  std::filesystem::path dataset(const std::string& name) const { return datasets() / name; }
  std::filesystem::path model(const std::string& name) const { return models() / name; }

  void ensure() const;
};

// Exclusive per-root lock held for the lifetime of the object. A lock left by
// a dead process is taken over. Errors: Conflict.
class DirLock {
 public:
  explicit DirLock(const Paths& paths);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
};

std::string json_digest(const nlohmann::json& j);
std::string file_digest(const std::filesystem::path& path);

// Appends one record to runs.jsonl, stamping time and version.
void append_run(const Paths& paths, nlohmann::json record);

// Writes `content` unless an identical file exists. A differing file is a
// Conflict unless `force`.
void write_artifact(const std::filesystem::path& path, const std::string& content, bool force);

nlohmann::json read_json(const std::filesystem::path& path);

// Accepts {name, delta_seconds, components: [{name, role}]}. Errors: ConfigError.
timebase::DatasetMeta meta_from_json(const nlohmann::json& j);
nlohmann::json meta_to_json(const timebase::DatasetMeta& meta);

// Registers every custom_archs/*.json manifest {name, base, hyperparams}
// as an alias of a built-in architecture. Returns the registered names.
// Errors: ConfigError, Conflict (name clash), ContractViolation.
std::vector<std::string> load_custom_archs(const Paths& paths);

struct RuleTerm {
  std::string component;
  int lag = 1;
  double coef = 0.0;
};

struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::int64_t delta_seconds = 3600;
  std::string start = "2020-01-01T00:00:00Z";
  std::vector<std::string> inputs{"x"};
  std::string target = "y";
  std::string input_kind = "gaussian";  // or "sinusoid"
  double intercept = 0.0;
  std::vector<RuleTerm> rule;
  int history = 0;  // max lag the rule may use; 0 means the largest rule lag
  double noise_std = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> gaps;  // (first removed row, length)
};

// Errors: ConfigError for an invalid rule or gap pattern.
SyntheticSpec synth_from_json(const nlohmann::json& j);

struct SyntheticSeries {
  std::vector<Timestamp> timestamps;  // gap rows removed
  std::vector<std::string> columns;   // inputs then target
  std::vector<std::vector<double>> values;  // per row
  std::vector<std::size_t> rows;            // original row index of each kept row
};

SyntheticSeries generate(const SyntheticSpec& spec);
std::string series_csv(const SyntheticSeries& series);

struct SynthFiles {
  std::filesystem::path csv, meta, rule;
};

SynthFiles write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir, bool force);

}  // namespace tk::exp

namespace tk::cli {

// Exit codes: 0 ok, 2 usage/config, 3 conflict, 4 runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tk::cli
