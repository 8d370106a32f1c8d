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

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tk/architectures.hpp"
#include "tk/matrix.hpp"
#include "tk/timebase.hpp"

namespace tk::trainer {

enum class Split { Train, Val, Eval };
std::string_view split_name(Split split);
// Errors: UnknownSplit (message lists the valid names).
Split parse_split(std::string_view text);

enum class LossKind { Mse, Mae, CrossEntropy };
enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  LossKind loss = LossKind::Mse;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.0;  // SGD only
  double weight_decay = 0.0;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool stateful = false;
  bool shuffle = true;

  // Errors: ConfigError when stateful && shuffle, or when the loss does not
  // suit the task kind.
  void validate(timebase::TaskKind kind) const;
};

nlohmann::json config_to_json(const TrainConfig& config);
// Missing keys take defaults; `shuffle` defaults to !stateful. Errors: ConfigError.
TrainConfig config_from_json(const nlohmann::json& j, timebase::TaskKind kind);

struct DataConfig {
  std::array<double, 3> fractions{0.7, 0.15, 0.15};
  timebase::SplitMode mode = timebase::SplitMode::Chronological;
  std::size_t stride = 1;
  bool scale_inputs = true;
  bool scale_outputs = true;
};

nlohmann::json data_config_to_json(const DataConfig& config);
DataConfig data_config_from_json(const nlohmann::json& j);

struct Sample {
  timebase::WindowPair window;  // scaled
  Matrix raw_y;                 // target in raw units
};

// Dataset, task, split and scaler, with windows materialized per split.
struct PreparedData {
  std::shared_ptr<const timebase::TimeSeriesDataset> dataset;
  timebase::TaskSpec task;
  DataConfig data_config;
  timebase::SplitAssignment split;
  timebase::ScalerParams scaler;
  std::array<std::vector<Sample>, 3> samples;
  std::string dataset_digest;
  std::string scaler_digest;
  std::string split_digest;

  const std::vector<Sample>& of(Split s) const { return samples[static_cast<std::size_t>(s)]; }
  const std::vector<timebase::PredictionPoint>& points(Split s) const;
  std::vector<std::size_t> out_component_indices() const;
};

// Errors: EmptyTrainSplit, plus timebase errors.
PreparedData prepare(std::shared_ptr<const timebase::TimeSeriesDataset> dataset,
                     const timebase::TaskSpec& task, const DataConfig& config);

struct Batch {
  std::vector<std::size_t> indices;  // positions in the split's point list
  bool reset = false;                // stateful: zero the carry before this batch
};

// Stateful: consecutive chronological runs within one slice, reset at each
// slice start. Otherwise the points are shuffled (if requested) with a
// generator seeded from (seed, epoch).
std::vector<Batch> make_batches(std::span<const timebase::PredictionPoint> points,
                                std::size_t batch_size, bool stateful, bool shuffle,
                                std::uint64_t seed, std::size_t epoch = 0);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::map<std::string, double> metrics;
};

struct Checkpoint {
  arch::ArchSpec arch;
  arch::TaskShape shape;
  std::uint64_t model_seed = 0;
  std::vector<std::string> param_names;
  std::vector<Shape> param_shapes;
  std::vector<std::vector<double>> params;  // best-epoch values
  std::vector<std::vector<double>> last_params;  // empty unless keep_last
  timebase::TaskSpec task;
  DataConfig data_config;
  timebase::ScalerParams scaler;
  std::string dataset_name;
  std::string dataset_digest;
  std::string scaler_digest;
  std::string split_digest;
  TrainConfig config;
  std::vector<EpochRecord> curves;
  std::size_t best_epoch = 0;  // 1-based
  double best_val = 0.0;

  std::unique_ptr<arch::Model> restore() const;
  std::string params_digest() const;
};

struct BatchEvent {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  bool reset = false;
  bool carried = false;  // state from the previous batch was live
  std::vector<timebase::PredictionPoint> points;
  double loss = 0.0;
};

struct TrainHooks {
  std::function<void(const BatchEvent&)> on_batch;
  std::function<void(const EpochRecord&)> on_epoch;
  bool keep_last = false;
};

// Errors: NonFiniteLoss, EmptyTrainSplit, ConfigError.
Checkpoint train(arch::Model& model, const PreparedData& data, const TrainConfig& config,
                 const TrainHooks& hooks = {});

// Mean loss of `model` over a split in scaled space, with the training loss.
double split_loss(arch::Model& model, const PreparedData& data, Split split,
                  const TrainConfig& config);

struct ComponentMetrics {
  std::string name;
  double mse = 0.0;
  double mae = 0.0;
};

struct EvalResult {
  Split split = Split::Val;
  timebase::TaskKind kind = timebase::TaskKind::Regression;
  std::size_t n = 0;
  double loss = 0.0;  // scaled-space training loss
  // Regression, raw units.
  double mse = 0.0;
  double mae = 0.0;
  std::vector<ComponentMetrics> per_component;
  // Classification.
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> point_losses;  // raw-unit MSE or cross-entropy, per point
  std::vector<timebase::PredictionPoint> points;
  std::vector<Matrix> predictions;  // raw units, or class probabilities
  std::vector<Matrix> targets;      // raw units, or one-hot

  nlohmann::json to_json() const;
};

EvalResult regression_metrics(const std::vector<Matrix>& predictions,
                              const std::vector<Matrix>& targets,
                              const std::vector<std::string>& component_names);
EvalResult classification_metrics(const std::vector<Matrix>& probabilities,
                                  const std::vector<std::size_t>& labels, std::size_t n_classes);

// Errors: UnknownSplit via parse_split at the call site; EmptyResults when
// the split holds no points.
EvalResult evaluate(arch::Model& model, const PreparedData& data, Split split,
                    const TrainConfig& config);
EvalResult evaluate(const Checkpoint& checkpoint, const PreparedData& data, Split split);

struct Predictions {
  std::vector<timebase::PredictionPoint> points;
  std::vector<Matrix> values;  // regression: raw units; classification: probabilities
  std::vector<std::size_t> labels;  // classification argmax
};

// Errors: OutOfRange for invalid points.
Predictions predict(arch::Model& model, const PreparedData& data,
                    std::span<const timebase::PredictionPoint> points, std::size_t batch_size = 64);

// Scaled-space forward over windows; stateful models see the points in the
// given order with the carry reset at slice changes.
std::vector<Matrix> forward_windows(arch::Model& model, const std::vector<Sample>& samples,
                                    std::size_t batch_size);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& dir);
// Errors: NotFound, IOFailure (digest mismatch), ConfigError.
Checkpoint load_checkpoint(const std::string& dir);
std::string curves_csv(const std::vector<EpochRecord>& curves);

struct SweepConfig {
  // Key -> candidate values. Keys are "arch.<hyperparameter>" or
  // "train.<config field>".
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> grid;
  std::string selection_metric = "val_loss";
  bool consolidate = true;
  std::size_t workers = 1;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);

struct TrialRecord {
  std::size_t trial_id = 0;
  nlohmann::json config;  // this trial's grid assignment
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  std::string status;  // "ok" or "failed"
  std::string error;

  nlohmann::json to_json() const;
};

struct SweepResult {
  std::vector<TrialRecord> trials;
  std::optional<std::size_t> best;  // index into trials
  std::optional<Checkpoint> consolidated;
};

std::size_t trial_count(const SweepConfig& sweep);
// Grid assignment of trial `index`, last key varying fastest.
nlohmann::json trial_assignment(const SweepConfig& sweep, std::size_t index);
std::uint64_t trial_seed(std::uint64_t base, std::size_t index);

// Errors: ConfigError for an empty grid or unknown keys. Per-trial failures
// are recorded, not thrown.
SweepResult sweep(const SweepConfig& sweep, const arch::ArchSpec& base_arch,
                  const TrainConfig& base_config, const PreparedData& data,
                  const std::function<void(const TrialRecord&)>& on_trial = {});

}  // namespace tk::trainer
