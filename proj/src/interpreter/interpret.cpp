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

#include "tk/error.hpp"
#include "tk/interpreter.hpp"

namespace tk::interp {

using nlohmann::json;
using namespace tk::timebase;
using trainer::Sample;
using trainer::Split;

std::string_view method_name(Method method) {
  switch (method) {
    case Method::IntegratedGradients: return "integrated_gradients";
    case Method::GradXInput: return "grad_x_input";
    case Method::Occlusion: return "occlusion";
  }
  return "?";
}

namespace {

Method parse_method(const std::string& s) {
  if (s == "integrated_gradients") return Method::IntegratedGradients;
  if (s == "grad_x_input") return Method::GradXInput;
  if (s == "occlusion") return Method::Occlusion;
  fail(ErrorKind::ConfigError,
       "unknown method '" + s + "' (integrated_gradients, grad_x_input, occlusion)");
}

SelectionMode parse_mode(const std::string& s) {
  if (s == "random") return SelectionMode::Random;
  if (s == "best") return SelectionMode::Best;
  if (s == "worst") return SelectionMode::Worst;
  if (s == "explicit") return SelectionMode::Explicit;
  fail(ErrorKind::ConfigError, "unknown selection mode '" + s + "' (random, best, worst, explicit)");
}

std::string_view mode_name(SelectionMode m) {
  switch (m) {
    case SelectionMode::Random: return "random";
    case SelectionMode::Best: return "best";
    case SelectionMode::Worst: return "worst";
    case SelectionMode::Explicit: return "explicit";
  }
  return "?";
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, where + " must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      fail(ErrorKind::ConfigError, "unknown " + where + " field '" + key + "'");
    }
  }
}

}  // namespace

AttributionRequest request_from_json(const json& j) {
  only_keys(j, {"method", "target", "baseline", "ig_steps", "patch", "selection"}, "interpret");
  AttributionRequest r;
  try {
    if (j.contains("method")) r.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("target")) {
      const json& t = j.at("target");
      only_keys(t, {"row", "col", "class"}, "target");
      Target target;
      if (t.contains("class")) {
        target.col = t.at("class").get<std::size_t>();
      } else {
        target.row = t.value("row", std::size_t{0});
        target.col = t.value("col", std::size_t{0});
      }
      r.target = target;
    }
    if (j.contains("baseline")) {
      const json& b = j.at("baseline");
      if (b.is_string()) {
        const auto s = b.get<std::string>();
        if (s == "zero") {
          r.baseline = BaselineKind::Zero;
        } else if (s == "train_mean") {
          r.baseline = BaselineKind::TrainMean;
        } else {
          fail(ErrorKind::ConfigError, "baseline must be zero, train_mean or a matrix");
        }
      } else {
        const auto rows = b.get<std::vector<std::vector<double>>>();
        if (rows.empty() || rows.front().empty()) fail(ErrorKind::ConfigError, "empty baseline matrix");
        r.baseline = BaselineKind::Custom;
        r.custom_baseline = Matrix(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (rows[i].size() != rows.front().size()) fail(ErrorKind::ConfigError, "ragged baseline matrix");
          for (std::size_t c = 0; c < rows[i].size(); ++c) r.custom_baseline(i, c) = rows[i][c];
        }
      }
    }
    r.ig_steps = j.value("ig_steps", r.ig_steps);
    if (j.contains("patch")) {
      const auto p = j.at("patch").get<std::vector<std::size_t>>();
      if (p.size() != 2) fail(ErrorKind::ConfigError, "patch must be [rows, cols]");
      r.patch = {p[0], p[1]};
    }
    if (j.contains("selection")) {
      const json& s = j.at("selection");
      only_keys(s, {"mode", "k", "split", "seed", "indices"}, "selection");
      if (s.contains("mode")) r.selection.mode = parse_mode(s.at("mode").get<std::string>());
      r.selection.k = s.value("k", r.selection.k);
      if (s.contains("split")) {
        try {
          r.selection.split = trainer::parse_split(s.at("split").get<std::string>());
        } catch (const Error& e) {
          fail(ErrorKind::ConfigError, e.what());
        }
      }
      r.selection.seed = s.value("seed", r.selection.seed);
      if (s.contains("indices")) {
        r.selection.indices = s.at("indices").get<std::vector<std::size_t>>();
        if (!s.contains("mode")) r.selection.mode = SelectionMode::Explicit;
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed interpret config: ") + e.what());
  }
  if (r.ig_steps == 0) fail(ErrorKind::ConfigError, "ig_steps must be >= 1");
  if (r.patch.rows == 0 || r.patch.cols == 0) fail(ErrorKind::ConfigError, "patch spans must be >= 1");
  if (r.selection.mode != SelectionMode::Explicit && r.selection.k == 0) {
    fail(ErrorKind::ConfigError, "selection.k must be >= 1");
  }
  return r;
}

json request_to_json(const AttributionRequest& r) {
  json j;
  j["method"] = std::string(method_name(r.method));
  if (r.target) j["target"] = {{"row", r.target->row}, {"col", r.target->col}};
  if (r.baseline == BaselineKind::Custom) {
    json rows = json::array();
    for (std::size_t i = 0; i < r.custom_baseline.rows(); ++i) {
      const auto row = r.custom_baseline.row(i);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["baseline"] = rows;
  } else {
    j["baseline"] = r.baseline == BaselineKind::Zero ? "zero" : "train_mean";
  }
  j["ig_steps"] = r.ig_steps;
  j["patch"] = {r.patch.rows, r.patch.cols};
  j["selection"] = {{"mode", mode_name(r.selection.mode)},
                    {"k", r.selection.k},
                    {"split", split_name(r.selection.split)},
                    {"seed", r.selection.seed}};
  if (r.selection.mode == SelectionMode::Explicit) j["selection"]["indices"] = r.selection.indices;
  return j;
}

Interpretation interpret(arch::Model& model, const trainer::PreparedData& data,
                         const AttributionRequest& request) {
  const Split split = request.selection.split;
  const auto& samples = data.of(split);
  if (samples.empty()) {
    fail(ErrorKind::EmptyResults, "the " + std::string(split_name(split)) + " split holds no points");
  }
  const TaskSpec& task = data.task;
  const bool classification = task.kind == TaskKind::Classification;
  if (!classification && !request.target) {
    fail(ErrorKind::ConfigError, "regression interpretation needs a target {row, col}");
  }

  trainer::TrainConfig cfg;
  cfg.loss = classification ? trainer::LossKind::CrossEntropy : trainer::LossKind::Mse;
  const auto eval = trainer::evaluate(model, data, split, cfg);
  const auto positions = select_points(eval.point_losses, request.selection);

  Matrix baseline(task.in_length(), task.in_width());
  if (request.baseline == BaselineKind::Custom) {
    if (request.custom_baseline.rows() != baseline.rows() ||
        request.custom_baseline.cols() != baseline.cols()) {
      fail(ErrorKind::ConfigError, "custom baseline must be " + std::to_string(baseline.rows()) + "x" +
                                       std::to_string(baseline.cols()));
    }
    baseline = request.custom_baseline;
  } else if (request.baseline == BaselineKind::TrainMean && !data.scaler.scale_inputs) {
    const auto fitted = fit_scaler(*data.dataset, task, data.split.train, true, false);
    const auto comps = component_indices(*data.dataset, task.in_components);
    for (std::size_t r = 0; r < baseline.rows(); ++r)
      for (std::size_t c = 0; c < baseline.cols(); ++c) baseline(r, c) = fitted.mean[comps[c]];
  }

  const bool saved_training = model.training();
  model.set_training(false);
  Interpretation out;
  out.request = request;
  std::vector<Matrix> matrices;
  for (std::size_t pos : positions) {
    const Sample& s = samples[pos];
    PointAttribution pa;
    pa.position = pos;
    pa.point = s.window.point;
    pa.loss = eval.point_losses[pos];
    pa.input_scaled = s.window.x;
    pa.input_raw = build_window_pair(*data.dataset, s.window.point, task, nullptr).x;
    if (request.target) {
      pa.target = *request.target;
      if (classification) pa.target.row = 0;
    } else {
      const auto p = eval.predictions[pos].values();
      pa.target = {0, static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())};
    }
    const BatchScalar f = model_output(model, pa.target);
    switch (request.method) {
      case Method::IntegratedGradients:
        pa.attribution = integrated_gradients(f, s.window.x, baseline, request.ig_steps);
        break;
      case Method::GradXInput: pa.attribution = grad_x_input(f, s.window.x); break;
      case Method::Occlusion: pa.attribution = occlusion(f, s.window.x, baseline, request.patch); break;
    }
    matrices.push_back(pa.attribution.scores);
    out.points.push_back(std::move(pa));
  }
  model.set_training(saved_training);
  out.importance = aggregate_importance(matrices);
  return out;
}

}  // namespace tk::interp
