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
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tk/matrix.hpp"
#include "tk/timestamp.hpp"

// Dataset import, slicing, prediction-point enumeration, window
// construction, splitting and scaling.
namespace tk::timebase {

enum class ComponentRole { Input, Output, Both };

struct Component {
  std::string name;
  ComponentRole role = ComponentRole::Both;

  bool can_input() const { return role != ComponentRole::Output; }
  bool can_output() const { return role != ComponentRole::Input; }
};

std::string_view role_name(ComponentRole role);
ComponentRole parse_role(std::string_view text);

// Maximal run of equidistant timesteps.
struct Slice {
  Timestamp start_ts = 0;
  Matrix values;                // length x components, raw units
  std::vector<bool> synthetic;  // one flag per row; true for interpolated rows

  std::size_t length() const { return values.rows(); }
};

struct TimeSeriesDataset {
  std::string name;
  std::vector<Component> components;
  std::int64_t delta = 1;  // seconds between consecutive timesteps
  std::vector<Slice> slices;

  std::size_t n_total() const;
  std::size_t n_components() const { return components.size(); }
  // Throws MissingComponent.
  std::size_t component_index(std::string_view name) const;
  // Global index of the first row of slice `s`.
  std::size_t slice_offset(std::size_t s) const;
  Timestamp timestamp(std::size_t slice, std::size_t row) const {
    return slices[slice].start_ts + static_cast<Timestamp>(row) * delta;
  }
};

struct DatasetMeta {
  std::string name;
  std::int64_t delta_seconds = 0;
  std::vector<Component> components;
};

// Timestamp-keyed table as read from disk, before numeric validation.
struct RawTable {
  std::vector<std::string> columns;  // value columns, timestamp excluded
  std::vector<Timestamp> timestamps;
  std::vector<std::vector<std::string>> cells;  // one entry per row
};

// Reads a CSV whose first column is an ISO-8601 `timestamp`.
RawTable read_csv_table(const std::string& path);

// Splits the table into slices at gaps. Errors: NonMonotonicTimestamps,
// OffGridTimestamp, MissingComponent, NonNumericValue.
TimeSeriesDataset import_dataset(const RawTable& table, const DatasetMeta& meta);

enum class InterpolationMethod { Linear, Hold };

// Merges neighbouring slices separated by at most `max_gap` missing steps,
// synthesizing the missing rows.
TimeSeriesDataset interpolate_gaps(const TimeSeriesDataset& ds, std::size_t max_gap,
                                   InterpolationMethod method);

enum class TaskKind { Regression, Classification };
enum class EdgePolicy { Drop, PadZero, PadEdge };

std::string_view task_kind_name(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);
std::string_view edge_policy_name(EdgePolicy policy);
EdgePolicy parse_edge_policy(std::string_view text);

// Inclusive interval of signed delays relative to a prediction point.
struct DelayInterval {
  int first = 0;
  int last = 0;

  std::size_t length() const { return static_cast<std::size_t>(last - first + 1); }
  friend bool operator==(const DelayInterval&, const DelayInterval&) = default;
};

struct TaskSpec {
  DelayInterval in_delays;
  std::vector<std::string> in_components;
  DelayInterval out_delays;
  std::vector<std::string> out_components;
  TaskKind kind = TaskKind::Regression;
  std::size_t n_classes = 0;  // classification only
  EdgePolicy edge_policy = EdgePolicy::Drop;

  std::size_t in_length() const { return in_delays.length(); }
  std::size_t out_length() const { return out_delays.length(); }
  std::size_t in_width() const { return in_components.size(); }
  // Model output shape: (out_length, out_components) or (1, n_classes).
  std::size_t output_rows() const { return kind == TaskKind::Classification ? 1 : out_length(); }
  std::size_t output_cols() const {
    return kind == TaskKind::Classification ? n_classes : out_components.size();
  }
};

// Throws InvalidArgument / MissingComponent when the task does not fit the
// dataset.
void validate_task(const TaskSpec& task, const TimeSeriesDataset& ds);
void validate_task(const TaskSpec& task);

// Task flavours.
bool is_autoregressive(const TaskSpec& task);  // outputs among inputs, and causal
bool is_single_step(const TaskSpec& task);     // c == d
bool is_univariate(const TaskSpec& task);      // one output component
bool is_causal(const TaskSpec& task);          // a <= b < c <= d

struct PredictionPoint {
  std::size_t slice = 0;
  std::size_t offset = 0;  // row within the slice
  std::size_t global = 0;  // row within the concatenated dataset

  friend bool operator==(const PredictionPoint&, const PredictionPoint&) = default;
  friend auto operator<=>(const PredictionPoint& a, const PredictionPoint& b) {
    return a.global <=> b.global;
  }
};

struct EnumerateOptions {
  std::size_t stride = 1;
  std::optional<std::size_t> limit;
};

// Errors: EmptyTask when no point qualifies anywhere.
std::vector<PredictionPoint> enumerate_prediction_points(const TimeSeriesDataset& ds,
                                                         const TaskSpec& task,
                                                         const EnumerateOptions& options = {});

struct ScalerParams {
  std::vector<double> mean;  // indexed by dataset component
  std::vector<double> stddev;
  std::vector<bool> zero_variance;
  bool scale_inputs = true;
  bool scale_outputs = true;

  bool empty() const { return mean.empty(); }
};

struct WindowPair {
  PredictionPoint point;
  Matrix x;  // in_length x in_components
  Matrix y;  // out_length x out_components, or 1 x n_classes one-hot
  std::optional<std::size_t> label;  // classification only
  std::vector<std::size_t> padded_input_rows;
  std::vector<std::size_t> padded_output_rows;
};

// Errors: OutOfRange when `t` is not a valid prediction point for the task.
WindowPair build_window_pair(const TimeSeriesDataset& ds, const PredictionPoint& t,
                             const TaskSpec& task, const ScalerParams* scaler = nullptr);

enum class SplitMode { Chronological, BySlice };
SplitMode parse_split_mode(std::string_view text);

struct SplitAssignment {
  std::vector<PredictionPoint> train;
  std::vector<PredictionPoint> val;
  std::vector<PredictionPoint> eval;
  std::array<double, 3> fractions{1.0, 0.0, 0.0};
};

// Errors: InvalidArgument for bad fractions; DegenerateSplit when a split
// with a non-zero fraction ends up empty.
SplitAssignment split_points(std::span<const PredictionPoint> points,
                             const std::array<double, 3>& fractions, SplitMode mode);

// Z-score parameters from the dataset rows touched by the train windows.
// Components with zero variance get stddev 1 and a zero_variance flag.
ScalerParams fit_scaler(const TimeSeriesDataset& ds, const TaskSpec& task,
                        std::span<const PredictionPoint> train, bool scale_inputs = true,
                        bool scale_outputs = true);

// Columns of `m` correspond to the dataset components in `components`.
Matrix apply_scaler(const Matrix& m, const ScalerParams& params,
                    std::span<const std::size_t> components);
Matrix invert_scaler(const Matrix& m, const ScalerParams& params,
                     std::span<const std::size_t> components);

std::vector<std::size_t> component_indices(const TimeSeriesDataset& ds,
                                           std::span<const std::string> names);

// Binary column store + JSON manifest in `dir`.
void save_dataset(const TimeSeriesDataset& ds, const std::string& dir);
TimeSeriesDataset load_dataset(const std::string& dir);
std::string dataset_digest(const TimeSeriesDataset& ds);

}  // namespace tk::timebase
