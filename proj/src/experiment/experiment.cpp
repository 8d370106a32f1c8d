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

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "tk/architectures.hpp"
#include "tk/csv.hpp"
#include "tk/digest.hpp"
#include "tk/error.hpp"
#include "tk/experiment.hpp"
#include "tk/timestamp.hpp"

namespace tk::exp {

namespace fs = std::filesystem;
using nlohmann::json;

void Paths::ensure() const {
  std::error_code ec;
  for (const fs::path& p : {root, datasets(), models(), archs()}) {
    fs::create_directories(p, ec);
    if (ec) fail(ErrorKind::IOFailure, "cannot create " + p.string() + ": " + ec.message());
  }
}

DirLock::DirLock(const Paths& paths) : path_(paths.lock_file()) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    if (errno != EEXIST) fail(ErrorKind::IOFailure, "cannot create lock " + path_.string());
    long holder = 0;
    std::ifstream(path_) >> holder;
    const bool alive = holder > 0 && (::kill(static_cast<pid_t>(holder), 0) == 0 || errno == EPERM);
    if (alive) {
      fail(ErrorKind::Conflict, "experiment directory is locked by process " + std::to_string(holder) +
                                    " (" + path_.string() + ")");
    }
    std::error_code ec;
    fs::remove(path_, ec);
  }
  fail(ErrorKind::Conflict, "could not acquire " + path_.string());
}

DirLock::~DirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string json_digest(const json& j) { return sha256_hex(j.dump()); }

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return sha256_hex(s.str());
}

void append_run(const Paths& paths, json record) {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  record["time"] = format_iso8601(static_cast<Timestamp>(secs));
  record["version"] = kVersion;
  std::ofstream out(paths.runs_log(), std::ios::app);
  out << record.dump() << '\n';
  if (!out) fail(ErrorKind::IOFailure, "cannot append to " + paths.runs_log().string());
}

void write_artifact(const fs::path& path, const std::string& content, bool force) {
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    if (s.str() == content) return;
    if (!force) {
      fail(ErrorKind::Conflict, path.string() + " exists with different content; use --force to replace it");
    }
  }
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) fail(ErrorKind::IOFailure, "cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, path.string() + " is not valid JSON: " + e.what());
  }
}

timebase::DatasetMeta meta_from_json(const json& j) {
  timebase::DatasetMeta meta;
  try {
    meta.name = j.at("name").get<std::string>();
    meta.delta_seconds = j.at("delta_seconds").get<std::int64_t>();
    for (const auto& c : j.at("components")) {
      timebase::Component comp;
      comp.name = c.at("name").get<std::string>();
      comp.role = timebase::parse_role(c.value("role", "both"));
      meta.components.push_back(comp);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed dataset metadata: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::ConfigError, e.what());
  }
  if (meta.name.empty() || meta.name.find('/') != std::string::npos) {
    fail(ErrorKind::ConfigError, "dataset name must be a non-empty plain name");
  }
  return meta;
}

json meta_to_json(const timebase::DatasetMeta& meta) {
  json comps = json::array();
  for (const auto& c : meta.components) comps.push_back({{"name", c.name}, {"role", std::string(timebase::role_name(c.role))}});
  return {{"name", meta.name}, {"delta_seconds", meta.delta_seconds}, {"components", comps}};
}

namespace {

std::mutex g_alias_mu;
std::map<std::string, std::string> g_aliases;  // name -> manifest dump

}  // namespace

std::vector<std::string> load_custom_archs(const Paths& paths) {
  std::vector<std::string> names;
  if (!fs::exists(paths.archs())) return names;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(paths.archs())) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& file : files) {
    const json j = read_json(file);
    std::string name, base;
    json defaults;
    try {
      name = j.at("name").get<std::string>();
      base = j.at("base").get<std::string>();
      defaults = j.value("hyperparams", json::object());
    } catch (const json::exception& e) {
      fail(ErrorKind::ConfigError, file.string() + ": " + e.what());
    }
    if (!defaults.is_object()) fail(ErrorKind::ConfigError, file.string() + ": hyperparams must be an object");
    if (!arch::is_registered(base)) {
      fail(ErrorKind::ConfigError, file.string() + ": base architecture '" + base + "' is not registered");
    }
    {
      std::lock_guard lock(g_alias_mu);
      auto it = g_aliases.find(name);
      if (it != g_aliases.end()) {
        if (it->second != j.dump()) {
          fail(ErrorKind::Conflict, "custom architecture '" + name + "' changed since it was registered");
        }
        names.push_back(name);
        continue;
      }
    }
    if (arch::is_registered(name)) {
      fail(ErrorKind::Conflict, file.string() + ": name '" + name + "' is already taken");
    }
    arch::register_architecture(name, [base, defaults](const arch::ArchSpec& spec, const arch::TaskShape& shape,
                                                       std::uint64_t seed) {
      json merged = defaults;
      if (spec.hyperparams.is_object()) {
        for (const auto& [k, v] : spec.hyperparams.items()) merged[k] = v;
      }
      return arch::build_model({base, merged}, shape, seed);
    });
    std::lock_guard lock(g_alias_mu);
    g_aliases[name] = j.dump();
    names.push_back(name);
  }
  return names;
}

SyntheticSpec synth_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, "synthetic spec must be a JSON object");
  static const std::vector<std::string> known = {"name",     "n",      "seed",       "delta_seconds",
                                                 "start",    "inputs", "target",     "input_kind",
                                                 "rule",     "history", "noise_std", "gaps",
                                                 "n_gaps",   "gap_length", "output_dir"};
  for (const auto& [key, v] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::ConfigError, "unknown synthetic spec field '" + key + "'");
    }
  }
  SyntheticSpec s;
  try {
    s.name = j.value("name", s.name);
    s.n = j.value("n", s.n);
    s.seed = j.value("seed", s.seed);
    s.delta_seconds = j.value("delta_seconds", s.delta_seconds);
    s.start = j.value("start", s.start);
    if (j.contains("inputs")) s.inputs = j.at("inputs").get<std::vector<std::string>>();
    s.target = j.value("target", s.target);
    s.input_kind = j.value("input_kind", s.input_kind);
    s.history = j.value("history", s.history);
    s.noise_std = j.value("noise_std", s.noise_std);
    if (!j.contains("rule")) fail(ErrorKind::ConfigError, "synthetic spec needs a rule");
    const json& rule = j.at("rule");
    s.intercept = rule.value("intercept", 0.0);
    for (const auto& t : rule.at("terms")) {
      s.rule.push_back({t.at("component").get<std::string>(), t.at("lag").get<int>(), t.at("coef").get<double>()});
    }
    if (j.contains("gaps")) {
      for (const auto& g : j.at("gaps")) {
        s.gaps.emplace_back(g.at("at").get<std::size_t>(), g.at("length").get<std::size_t>());
      }
    }
    if (j.contains("n_gaps")) {
      const auto k = j.at("n_gaps").get<std::size_t>();
      const auto len = j.value("gap_length", std::size_t{3});
      for (std::size_t g = 1; g <= k; ++g) s.gaps.emplace_back(g * s.n / (k + 1), len);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed synthetic spec: ") + e.what());
  }

  if (s.n == 0) fail(ErrorKind::ConfigError, "n must be >= 1");
  if (s.delta_seconds <= 0) fail(ErrorKind::ConfigError, "delta_seconds must be > 0");
  if (!(s.noise_std >= 0.0)) fail(ErrorKind::ConfigError, "noise_std must be >= 0");
  if (s.input_kind != "gaussian" && s.input_kind != "sinusoid") {
    fail(ErrorKind::ConfigError, "input_kind must be gaussian or sinusoid");
  }
  if (s.inputs.empty()) fail(ErrorKind::ConfigError, "at least one input component is required");
  if (std::find(s.inputs.begin(), s.inputs.end(), s.target) != s.inputs.end()) {
    fail(ErrorKind::ConfigError, "target must differ from the inputs");
  }
  if (s.rule.empty()) fail(ErrorKind::ConfigError, "rule needs at least one term");
  int max_lag = 0;
  for (const RuleTerm& t : s.rule) {
    const bool known_comp = t.component == s.target ||
                            std::find(s.inputs.begin(), s.inputs.end(), t.component) != s.inputs.end();
    if (!known_comp) fail(ErrorKind::ConfigError, "rule references unknown component '" + t.component + "'");
    if (t.lag < 0) fail(ErrorKind::ConfigError, "rule lags must be >= 0");
    if (t.component == s.target && t.lag == 0) {
      fail(ErrorKind::ConfigError, "the target cannot depend on its own current value");
    }
    max_lag = std::max(max_lag, t.lag);
  }
  if (s.history == 0) s.history = max_lag;
  if (max_lag > s.history) {
    fail(ErrorKind::ConfigError, "rule lag " + std::to_string(max_lag) + " exceeds the declared history " +
                                     std::to_string(s.history));
  }
  std::sort(s.gaps.begin(), s.gaps.end());
  std::size_t end = 0;
  for (const auto& [at, len] : s.gaps) {
    if (len == 0) fail(ErrorKind::ConfigError, "gap length must be >= 1");
    if (at == 0 || at < end || at + len >= s.n) {
      fail(ErrorKind::ConfigError, "gaps must be disjoint, non-adjacent and strictly inside the series");
    }
    end = at + len + 1;
  }
  if (!parse_iso8601(s.start)) fail(ErrorKind::ConfigError, "start is not an ISO-8601 timestamp");
  return s;
}

SyntheticSeries generate(const SyntheticSpec& spec) {
  const std::size_t warmup = static_cast<std::size_t>(spec.history);
  const std::size_t total = spec.n + warmup;
  const std::size_t nin = spec.inputs.size();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> inputs(nin, std::vector<double>(total));
  if (spec.input_kind == "gaussian") {
    for (std::size_t t = 0; t < total; ++t)
      for (std::size_t c = 0; c < nin; ++c) inputs[c][t] = normal(rng);
  } else {
    std::uniform_real_distribution<double> period(8.0, 64.0), phase(0.0, 2.0 * std::numbers::pi);
    for (std::size_t c = 0; c < nin; ++c) {
      double p[3], ph[3];
      for (int k = 0; k < 3; ++k) p[k] = period(rng), ph[k] = phase(rng);
      for (std::size_t t = 0; t < total; ++t) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p[k] + ph[k]);
        inputs[c][t] = v / std::sqrt(1.5) + 0.1 * normal(rng);
      }
    }
  }
  std::vector<double> noise(total);
  for (double& e : noise) e = spec.noise_std * normal(rng);

  std::vector<double> y(total, 0.0);
  for (std::size_t t = 0; t < total; ++t) {
    if (t < warmup) {
      y[t] = spec.intercept + noise[t];
      continue;
    }
    double v = spec.intercept;
    for (const RuleTerm& term : spec.rule) {
      const std::size_t src = t - static_cast<std::size_t>(term.lag);
      if (term.component == spec.target) {
        v += term.coef * y[src];
      } else {
        const auto idx = static_cast<std::size_t>(
            std::find(spec.inputs.begin(), spec.inputs.end(), term.component) - spec.inputs.begin());
        v += term.coef * inputs[idx][src];
      }
    }
    y[t] = v + noise[t];
  }

  SyntheticSeries out;
  out.columns = spec.inputs;
  out.columns.push_back(spec.target);
  const Timestamp start = parse_iso8601(spec.start).value();
  std::size_t g = 0;
  for (std::size_t r = 0; r < spec.n; ++r) {
    while (g < spec.gaps.size() && r >= spec.gaps[g].first + spec.gaps[g].second) ++g;
    if (g < spec.gaps.size() && r >= spec.gaps[g].first) continue;
    const std::size_t t = r + warmup;
    std::vector<double> row;
    for (std::size_t c = 0; c < nin; ++c) row.push_back(inputs[c][t]);
    row.push_back(y[t]);
    out.values.push_back(std::move(row));
    out.rows.push_back(r);
    out.timestamps.push_back(start + static_cast<Timestamp>(r) * spec.delta_seconds);
  }
  return out;
}

std::string series_csv(const SyntheticSeries& series) {
  std::ostringstream s;
  s << "timestamp";
  for (const auto& c : series.columns) s << ',' << c;
  s << '\n';
  for (std::size_t r = 0; r < series.values.size(); ++r) {
    s << format_iso8601(series.timestamps[r]);
    for (double v : series.values[r]) s << ',' << format_double(v);
    s << '\n';
  }
  return s.str();
}

SynthFiles write_synthetic(const SyntheticSpec& spec, const fs::path& dir, bool force) {
  const SyntheticSeries series = generate(spec);
  SynthFiles files{dir / (spec.name + ".csv"), dir / (spec.name + ".meta.json"), dir / (spec.name + ".rule.json")};
  timebase::DatasetMeta meta;
  meta.name = spec.name;
  meta.delta_seconds = spec.delta_seconds;
  for (const auto& c : spec.inputs) meta.components.push_back({c, timebase::ComponentRole::Input});
  meta.components.push_back({spec.target, timebase::ComponentRole::Output});
  json terms = json::array();
  for (const RuleTerm& t : spec.rule) terms.push_back({{"component", t.component}, {"lag", t.lag}, {"coef", t.coef}});
  json gaps = json::array();
  for (const auto& [at, len] : spec.gaps) gaps.push_back({{"at", at}, {"length", len}});
  const json rule = {{"target", spec.target},  {"intercept", spec.intercept}, {"terms", terms},
                     {"noise_std", spec.noise_std}, {"history", spec.history}, {"seed", spec.seed},
                     {"n", spec.n},            {"gaps", gaps}};
  write_artifact(files.csv, series_csv(series), force);
  write_artifact(files.meta, meta_to_json(meta).dump(2) + "\n", force);
  write_artifact(files.rule, rule.dump(2) + "\n", force);
  return files;
}

}  // namespace tk::exp
