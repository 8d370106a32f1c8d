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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tk/csv.hpp"
#include "tk/digest.hpp"
#include "tk/error.hpp"
#include "tk/timebase_json.hpp"
#include "tk/trainer.hpp"

namespace tk::trainer {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tk::timebase;

namespace {

constexpr const char* kFormat = "tk-checkpoint/1";

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json shape_to_json(const arch::TaskShape& s) {
  return json{{"in_len", s.in_len},   {"in_width", s.in_width},           {"out_len", s.out_len},
              {"out_width", s.out_width}, {"classification", s.classification}};
}

arch::TaskShape shape_from_json(const json& j) {
  arch::TaskShape s;
  s.in_len = j.at("in_len").get<std::size_t>();
  s.in_width = j.at("in_width").get<std::size_t>();
  s.out_len = j.at("out_len").get<std::size_t>();
  s.out_width = j.at("out_width").get<std::size_t>();
  s.classification = j.at("classification").get<bool>();
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::IOFailure, "cannot write " + path.string());
}

}  // namespace

std::unique_ptr<arch::Model> Checkpoint::restore() const {
  auto model = arch::build_model(arch, shape, model_seed);
  model->load(params);
  return model;
}

std::string Checkpoint::params_digest() const {
  Digester d;
  for (const auto& p : params) d.update(std::span<const double>(p));
  return d.hex();
}

json EvalResult::to_json() const {
  json j;
  j["split"] = std::string(split_name(split));
  j["kind"] = std::string(task_kind_name(kind));
  j["n"] = n;
  j["loss"] = number_or_null(loss);
  if (kind == TaskKind::Regression) {
    j["mse"] = number_or_null(mse);
    j["mae"] = number_or_null(mae);
    j["per_component"] = json::array();
    for (const auto& c : per_component) {
      j["per_component"].push_back({{"component", c.name}, {"mse", number_or_null(c.mse)}, {"mae", number_or_null(c.mae)}});
    }
  } else {
    j["accuracy"] = accuracy;
    j["macro_f1"] = macro_f1;
    j["confusion"] = confusion;
  }
  j["point_losses"] = json::array();
  for (double v : point_losses) j["point_losses"].push_back(number_or_null(v));
  j["points"] = points_to_json(points);
  return j;
}

json TrialRecord::to_json() const {
  return json{{"trial_id", trial_id},
              {"config", config},
              {"best_val", number_or_null(best_val)},
              {"best_epoch", best_epoch},
              {"status", status},
              {"error", error}};
}

std::string curves_csv(const std::vector<EpochRecord>& curves) {
  std::vector<std::string> metric_names;
  if (!curves.empty()) {
    for (const auto& [name, v] : curves.front().metrics) metric_names.push_back(name);
  }
  std::ostringstream out;
  out << "epoch,train_loss,val_loss";
  for (const auto& n : metric_names) out << ',' << n;
  out << '\n';
  for (const EpochRecord& r : curves) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss);
    for (const auto& n : metric_names) {
      auto it = r.metrics.find(n);
      out << ',' << (it == r.metrics.end() ? std::string() : format_double(it->second));
    }
    out << '\n';
  }
  return out.str();
}

void save_checkpoint(const Checkpoint& c, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IOFailure, "cannot create " + dir + ": " + ec.message());

  json j;
  j["format"] = kFormat;
  j["arch"] = {{"name", c.arch.name}, {"hyperparams", c.arch.hyperparams}};
  j["shape"] = shape_to_json(c.shape);
  j["model_seed"] = c.model_seed;
  j["parameters"] = json::array();
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    j["parameters"].push_back({{"name", c.param_names.at(i)}, {"shape", c.param_shapes.at(i)}});
  }
  j["has_last_params"] = !c.last_params.empty();
  j["params_digest"] = c.params_digest();
  j["task"] = task_to_json(c.task);
  j["data"] = data_config_to_json(c.data_config);
  j["scaler"] = scaler_to_json(c.scaler);
  j["dataset"] = c.dataset_name;
  j["dataset_digest"] = c.dataset_digest;
  j["scaler_digest"] = c.scaler_digest;
  j["split_digest"] = c.split_digest;
  j["train"] = config_to_json(c.config);
  j["best_epoch"] = c.best_epoch;
  j["best_val"] = number_or_null(c.best_val);
  j["curves"] = json::array();
  for (const EpochRecord& r : c.curves) {
    json m = json::object();
    for (const auto& [name, v] : r.metrics) m[name] = number_or_null(v);
    j["curves"].push_back({{"epoch", r.epoch},
                           {"train_loss", number_or_null(r.train_loss)},
                           {"val_loss", number_or_null(r.val_loss)},
                           {"metrics", m}});
  }

  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  for (const auto* set : {&c.params, &c.last_params}) {
    for (const auto& p : *set) {
      bin.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    }
  }
  if (!bin) fail(ErrorKind::IOFailure, "cannot write params.bin in " + dir);
  bin.close();
  write_text(fs::path(dir) / "model.json", j.dump(2) + "\n");
  write_text(fs::path(dir) / "curves.csv", curves_csv(c.curves));
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / "model.json";
  if (!fs::exists(manifest)) fail(ErrorKind::NotFound, "no checkpoint at " + dir);
  json j;
  {
    std::ifstream in(manifest);
    try {
      in >> j;
    } catch (const json::exception& e) {
      fail(ErrorKind::ConfigError, manifest.string() + ": " + e.what());
    }
  }
  Checkpoint c;
  try {
    if (j.at("format") != kFormat) fail(ErrorKind::ConfigError, "unsupported checkpoint format");
    c.arch.name = j.at("arch").at("name").get<std::string>();
    c.arch.hyperparams = j.at("arch").at("hyperparams");
    c.shape = shape_from_json(j.at("shape"));
    c.model_seed = j.at("model_seed").get<std::uint64_t>();
    for (const auto& p : j.at("parameters")) {
      c.param_names.push_back(p.at("name").get<std::string>());
      c.param_shapes.push_back(p.at("shape").get<Shape>());
    }
    c.task = task_from_json(j.at("task"));
    c.data_config = data_config_from_json(j.at("data"));
    c.scaler = scaler_from_json(j.at("scaler"));
    c.dataset_name = j.at("dataset").get<std::string>();
    c.dataset_digest = j.at("dataset_digest").get<std::string>();
    c.scaler_digest = j.at("scaler_digest").get<std::string>();
    c.split_digest = j.at("split_digest").get<std::string>();
    c.config = config_from_json(j.at("train"), c.task.kind);
    c.best_epoch = j.at("best_epoch").get<std::size_t>();
    c.best_val = j.at("best_val").is_null() ? NAN : j.at("best_val").get<double>();
    for (const auto& r : j.at("curves")) {
      EpochRecord rec;
      rec.epoch = r.at("epoch").get<std::size_t>();
      rec.train_loss = r.at("train_loss").is_null() ? NAN : r.at("train_loss").get<double>();
      rec.val_loss = r.at("val_loss").is_null() ? NAN : r.at("val_loss").get<double>();
      for (const auto& [name, v] : r.at("metrics").items()) {
        rec.metrics[name] = v.is_null() ? NAN : v.get<double>();
      }
      c.curves.push_back(rec);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, manifest.string() + ": " + e.what());
  }

  std::ifstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) fail(ErrorKind::NotFound, "missing params.bin in " + dir);
  auto read_set = [&](std::vector<std::vector<double>>& set) {
    for (const Shape& s : c.param_shapes) {
      std::vector<double> v(shape_size(s));
      bin.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
      if (!bin) fail(ErrorKind::IOFailure, "params.bin in " + dir + " is truncated");
      set.push_back(std::move(v));
    }
  };
  read_set(c.params);
  if (j.value("has_last_params", false)) read_set(c.last_params);
  if (c.params_digest() != j.at("params_digest").get<std::string>()) {
    fail(ErrorKind::IOFailure, "params.bin in " + dir + " does not match its recorded digest");
  }
  return c;
}

}  // namespace tk::trainer
