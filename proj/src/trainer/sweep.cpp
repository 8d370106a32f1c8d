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

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "tk/error.hpp"
#include "tk/trainer.hpp"

namespace tk::trainer {

using nlohmann::json;

SweepConfig sweep_config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, "sweep must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "grid" && key != "selection_metric" && key != "consolidate" && key != "workers") {
      fail(ErrorKind::ConfigError, "unknown sweep field '" + key + "'");
    }
  }
  SweepConfig s;
  if (!j.contains("grid") || !j.at("grid").is_object() || j.at("grid").empty()) {
    fail(ErrorKind::ConfigError, "sweep.grid must be a non-empty object of value lists");
  }
  for (const auto& [key, values] : j.at("grid").items()) {
    if (!values.is_array() || values.empty()) {
      fail(ErrorKind::ConfigError, "sweep.grid." + key + " must be a non-empty list");
    }
    s.grid.emplace_back(key, std::vector<json>(values.begin(), values.end()));
  }
  try {
    s.selection_metric = j.value("selection_metric", s.selection_metric);
    s.consolidate = j.value("consolidate", s.consolidate);
    s.workers = j.value("workers", s.workers);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed sweep config: ") + e.what());
  }
  return s;
}

std::size_t trial_count(const SweepConfig& sweep) {
  std::size_t n = sweep.grid.empty() ? 0 : 1;
  for (const auto& [key, values] : sweep.grid) n *= values.size();
  return n;
}

json trial_assignment(const SweepConfig& sweep, std::size_t index) {
  json out = json::object();
  for (auto it = sweep.grid.rbegin(); it != sweep.grid.rend(); ++it) {
    out[it->first] = it->second[index % it->second.size()];
    index /= it->second.size();
  }
  return out;
}

namespace {

void check_grid(const SweepConfig& sweep, const TrainConfig& base) {
  if (sweep.grid.empty()) fail(ErrorKind::ConfigError, "sweep grid is empty");
  if (sweep.selection_metric != "val_loss") {
    fail(ErrorKind::ConfigError, "selection_metric must be val_loss");
  }
  const json train_keys = config_to_json(base);
  for (const auto& [key, values] : sweep.grid) {
    if (values.empty()) fail(ErrorKind::ConfigError, "grid entry '" + key + "' has no values");
    if (key.rfind("arch.", 0) == 0 && key.size() > 5) continue;
    if (key.rfind("train.", 0) == 0 && train_keys.contains(key.substr(6))) continue;
    fail(ErrorKind::ConfigError,
         "grid key '" + key + "' must be arch.<hyperparameter> or train.<known field>");
  }
}

}  // namespace

SweepResult sweep(const SweepConfig& sweep, const arch::ArchSpec& base_arch,
                  const TrainConfig& base_config, const PreparedData& data,
                  const std::function<void(const TrialRecord&)>& on_trial) {
  check_grid(sweep, base_config);
  const std::size_t n = trial_count(sweep);
  std::vector<TrialRecord> records(n);
  std::vector<std::optional<Checkpoint>> checkpoints(n);
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  auto run_trial = [&](std::size_t i) {
    TrialRecord& rec = records[i];
    rec.trial_id = i;
    rec.config = trial_assignment(sweep, i);
    try {
      arch::ArchSpec spec = base_arch;
      if (spec.hyperparams.is_null()) spec.hyperparams = json::object();
      json train_json = config_to_json(base_config);
      for (const auto& [key, value] : rec.config.items()) {
        if (key.rfind("arch.", 0) == 0) {
          spec.hyperparams[key.substr(5)] = value;
        } else {
          train_json[key.substr(6)] = value;
        }
      }
      const std::uint64_t seed = trial_seed(base_config.seed, i);
      train_json["seed"] = seed;
      const TrainConfig config = config_from_json(train_json, data.task.kind);
      auto model = arch::build_model(spec, arch::TaskShape::from_task(data.task), seed);
      Checkpoint ckpt = train(*model, data, config);
      rec.best_val = ckpt.best_val;
      rec.best_epoch = ckpt.best_epoch;
      rec.status = "ok";
      if (sweep.consolidate) checkpoints[i] = std::move(ckpt);
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.best_val = std::numeric_limits<double>::quiet_NaN();
      rec.error = e.what();
    }
    if (on_trial) {
      std::lock_guard lock(mu);
      on_trial(rec);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(sweep.workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run_trial(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run_trial(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  SweepResult result;
  result.trials = std::move(records);
  for (std::size_t i = 0; i < n; ++i) {
    const TrialRecord& r = result.trials[i];
    if (r.status != "ok" || !std::isfinite(r.best_val)) continue;
    if (!result.best || r.best_val < result.trials[*result.best].best_val) result.best = i;
  }
  if (sweep.consolidate && result.best) result.consolidated = std::move(checkpoints[*result.best]);
  return result;
}

}  // namespace tk::trainer
