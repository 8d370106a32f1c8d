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
#include <numeric>
#include <random>

#include "tk/digest.hpp"
#include "tk/error.hpp"
#include "tk/timebase_json.hpp"
#include "tk/trainer.hpp"

namespace tk::trainer {

using nlohmann::json;
using namespace tk::timebase;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Eval: return "eval";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "eval") return Split::Eval;
  fail(ErrorKind::UnknownSplit,
       "unknown split '" + std::string(text) + "'; valid splits are train, val, eval");
}

namespace {

std::string_view loss_name(LossKind k) {
  switch (k) {
    case LossKind::Mse: return "mse";
    case LossKind::Mae: return "mae";
    case LossKind::CrossEntropy: return "cross_entropy";
  }
  return "?";
}

LossKind parse_loss(const std::string& s) {
  if (s == "mse") return LossKind::Mse;
  if (s == "mae") return LossKind::Mae;
  if (s == "cross_entropy") return LossKind::CrossEntropy;
  fail(ErrorKind::ConfigError, "unknown loss '" + s + "' (mse, mae, cross_entropy)");
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  fail(ErrorKind::ConfigError, "unknown optimizer '" + s + "' (adam, sgd)");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::ConfigError, std::string("train.") + key + " has the wrong type");
  }
}

void check_keys(const json& j, const std::vector<std::string>& known, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::ConfigError, "unknown " + where + " field '" + key + "'");
    }
  }
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

void TrainConfig::validate(TaskKind kind) const {
  if (stateful && shuffle) fail(ErrorKind::ConfigError, "stateful training requires shuffle=false");
  if (kind == TaskKind::Classification && loss != LossKind::CrossEntropy) {
    fail(ErrorKind::ConfigError, "classification tasks train with cross_entropy");
  }
  if (kind == TaskKind::Regression && loss == LossKind::CrossEntropy) {
    fail(ErrorKind::ConfigError, "cross_entropy needs a classification task");
  }
  if (batch_size == 0) fail(ErrorKind::ConfigError, "batch_size must be >= 1");
  if (max_epochs == 0) fail(ErrorKind::ConfigError, "max_epochs must be >= 1");
  if (!(lr > 0.0)) fail(ErrorKind::ConfigError, "lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::ConfigError, "betas must lie in [0, 1)");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorKind::ConfigError, "momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) fail(ErrorKind::ConfigError, "weight_decay must be >= 0");
}

json config_to_json(const TrainConfig& c) {
  return json{{"loss", loss_name(c.loss)},
              {"optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"momentum", c.momentum},
              {"weight_decay", c.weight_decay},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"seed", c.seed},
              {"stateful", c.stateful},
              {"shuffle", c.shuffle}};
}

TrainConfig config_from_json(const json& j, TaskKind kind) {
  check_keys(j,
             {"loss", "optimizer", "lr", "beta1", "beta2", "eps", "momentum", "weight_decay",
              "batch_size", "max_epochs", "patience", "seed", "stateful", "shuffle"},
             "train");
  TrainConfig c;
  c.loss = kind == TaskKind::Classification ? LossKind::CrossEntropy : LossKind::Mse;
  std::string text;
  if (j.contains("loss")) {
    read(j, "loss", text);
    c.loss = parse_loss(text);
  }
  if (j.contains("optimizer")) {
    read(j, "optimizer", text);
    c.optimizer = parse_optimizer(text);
  }
  read(j, "lr", c.lr);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "eps", c.eps);
  read(j, "momentum", c.momentum);
  read(j, "weight_decay", c.weight_decay);
  read(j, "batch_size", c.batch_size);
  read(j, "max_epochs", c.max_epochs);
  read(j, "patience", c.patience);
  read(j, "seed", c.seed);
  read(j, "stateful", c.stateful);
  c.shuffle = !c.stateful;
  read(j, "shuffle", c.shuffle);
  c.validate(kind);
  return c;
}

json data_config_to_json(const DataConfig& c) {
  return json{{"fractions", c.fractions},
              {"split_mode", c.mode == SplitMode::Chronological ? "chronological" : "by_slice"},
              {"stride", c.stride},
              {"scale_inputs", c.scale_inputs},
              {"scale_outputs", c.scale_outputs}};
}

DataConfig data_config_from_json(const json& j) {
  check_keys(j, {"fractions", "split_mode", "stride", "scale_inputs", "scale_outputs"}, "data");
  DataConfig c;
  try {
    if (j.contains("fractions")) {
      const auto f = j.at("fractions").get<std::vector<double>>();
      if (f.size() != 3) fail(ErrorKind::ConfigError, "data.fractions needs three entries");
      c.fractions = {f[0], f[1], f[2]};
    }
    if (j.contains("split_mode")) c.mode = parse_split_mode(j.at("split_mode").get<std::string>());
    if (j.contains("stride")) c.stride = j.at("stride").get<std::size_t>();
    if (j.contains("scale_inputs")) c.scale_inputs = j.at("scale_inputs").get<bool>();
    if (j.contains("scale_outputs")) c.scale_outputs = j.at("scale_outputs").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed data config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    fail(ErrorKind::ConfigError, e.what());
  }
  if (c.stride == 0) fail(ErrorKind::ConfigError, "data.stride must be >= 1");
  return c;
}

const std::vector<PredictionPoint>& PreparedData::points(Split s) const {
  switch (s) {
    case Split::Train: return split.train;
    case Split::Val: return split.val;
    case Split::Eval: return split.eval;
  }
  return split.train;
}

std::vector<std::size_t> PreparedData::out_component_indices() const {
  return component_indices(*dataset, task.out_components);
}

PreparedData prepare(std::shared_ptr<const TimeSeriesDataset> dataset, const TaskSpec& task,
                     const DataConfig& config) {
  if (!dataset) fail(ErrorKind::InvalidArgument, "prepare: no dataset");
  validate_task(task, *dataset);
  PreparedData data;
  data.dataset = dataset;
  data.task = task;
  data.data_config = config;
  EnumerateOptions options;
  options.stride = config.stride;
  const auto points = enumerate_prediction_points(*dataset, task, options);
  data.split = split_points(points, config.fractions, config.mode);
  if (data.split.train.empty()) fail(ErrorKind::EmptyTrainSplit, "the train split holds no points");
  data.scaler = fit_scaler(*dataset, task, data.split.train, config.scale_inputs, config.scale_outputs);
  for (Split s : {Split::Train, Split::Val, Split::Eval}) {
    auto& out = data.samples[static_cast<std::size_t>(s)];
    for (const PredictionPoint& p : data.points(s)) {
      Sample sample;
      sample.window = build_window_pair(*dataset, p, task, &data.scaler);
      sample.raw_y = build_window_pair(*dataset, p, task, nullptr).y;
      out.push_back(std::move(sample));
    }
  }
  data.dataset_digest = dataset_digest(*dataset);
  data.scaler_digest = scaler_digest(data.scaler);
  data.split_digest = split_digest(data.split);
  return data;
}

std::vector<Batch> make_batches(std::span<const PredictionPoint> points, std::size_t batch_size,
                                bool stateful, bool shuffle, std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) fail(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  std::vector<Batch> batches;
  if (stateful) {
    std::size_t i = 0;
    while (i < points.size()) {
      std::size_t end = i;
      while (end < points.size() && points[end].slice == points[i].slice) ++end;
      for (std::size_t b = i; b < end; b += batch_size) {
        Batch batch;
        batch.reset = b == i;
        for (std::size_t k = b; k < std::min(end, b + batch_size); ++k) batch.indices.push_back(k);
        batches.push_back(std::move(batch));
      }
      i = end;
    }
    return batches;
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(mix(seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
  }
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    Batch batch;
    batch.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + batch_size)));
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t index) { return mix(base, 1000003 + index); }

}  // namespace tk::trainer
