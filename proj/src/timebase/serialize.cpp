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

#include "tk/digest.hpp"
#include "tk/error.hpp"
#include "tk/timebase_json.hpp"

namespace tk::timebase {

using nlohmann::json;

namespace {

json delays_to_json(const DelayInterval& d) { return json::array({d.first, d.last}); }

DelayInterval delays_from_json(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    fail(ErrorKind::ConfigError, std::string("task.") + key + " must be [first, last] integers");
  }
  return DelayInterval{j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

json task_to_json(const TaskSpec& task) {
  json j;
  j["in_delays"] = delays_to_json(task.in_delays);
  j["in_components"] = task.in_components;
  j["out_delays"] = delays_to_json(task.out_delays);
  j["out_components"] = task.out_components;
  j["kind"] = std::string(task_kind_name(task.kind));
  if (task.kind == TaskKind::Classification) j["n_classes"] = task.n_classes;
  j["edge_policy"] = std::string(edge_policy_name(task.edge_policy));
  return j;
}

TaskSpec task_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, "task must be a JSON object");
  for (const char* key : {"in_delays", "in_components", "out_delays", "out_components"}) {
    if (!j.contains(key)) fail(ErrorKind::ConfigError, std::string("task.") + key + " is required");
  }
  for (const auto& [key, value] : j.items()) {
    static const std::vector<std::string> known = {"in_delays",      "in_components", "out_delays",
                                                   "out_components", "kind",          "n_classes",
                                                   "edge_policy"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::ConfigError, "unknown task field '" + key + "'");
    }
  }
  TaskSpec task;
  try {
    task.in_delays = delays_from_json(j.at("in_delays"), "in_delays");
    task.out_delays = delays_from_json(j.at("out_delays"), "out_delays");
    task.in_components = j.at("in_components").get<std::vector<std::string>>();
    task.out_components = j.at("out_components").get<std::vector<std::string>>();
    if (j.contains("kind")) task.kind = parse_task_kind(j.at("kind").get<std::string>());
    if (j.contains("n_classes")) task.n_classes = j.at("n_classes").get<std::size_t>();
    if (j.contains("edge_policy")) {
      task.edge_policy = parse_edge_policy(j.at("edge_policy").get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed task: ") + e.what());
  }
  try {
    validate_task(task);
  } catch (const Error& e) {
    fail(ErrorKind::ConfigError, e.what());
  }
  return task;
}

json scaler_to_json(const ScalerParams& scaler) {
  json j;
  j["mean"] = scaler.mean;
  j["stddev"] = scaler.stddev;
  j["zero_variance"] = scaler.zero_variance;
  j["scale_inputs"] = scaler.scale_inputs;
  j["scale_outputs"] = scaler.scale_outputs;
  return j;
}

ScalerParams scaler_from_json(const json& j) {
  ScalerParams s;
  try {
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    s.zero_variance = j.at("zero_variance").get<std::vector<bool>>();
    s.scale_inputs = j.at("scale_inputs").get<bool>();
    s.scale_outputs = j.at("scale_outputs").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed scaler: ") + e.what());
  }
  if (s.stddev.size() != s.mean.size() || s.zero_variance.size() != s.mean.size()) {
    fail(ErrorKind::ConfigError, "scaler vectors differ in length");
  }
  return s;
}

json points_to_json(std::span<const PredictionPoint> points) {
  json j = json::array();
  for (const PredictionPoint& p : points) j.push_back({p.slice, p.offset, p.global});
  return j;
}

std::vector<PredictionPoint> points_from_json(const json& j) {
  std::vector<PredictionPoint> out;
  try {
    for (const auto& e : j) {
      out.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed point list: ") + e.what());
  }
  return out;
}

std::string scaler_digest(const ScalerParams& scaler) {
  return sha256_hex(scaler_to_json(scaler).dump());
}

std::string split_digest(const SplitAssignment& split) {
  Digester d;
  for (const auto* part : {&split.train, &split.val, &split.eval}) {
    d.update(points_to_json(*part).dump());
    d.update("|");
  }
  return d.hex();
}

}  // namespace tk::timebase
