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
#include <cmath>
#include <string>

#include "tk/error.hpp"
#include "tk/timebase.hpp"

namespace tk::timebase {

std::string_view task_kind_name(TaskKind kind) {
  return kind == TaskKind::Classification ? "classification" : "regression";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "regression") return TaskKind::Regression;
  if (text == "classification") return TaskKind::Classification;
  fail(ErrorKind::InvalidArgument, "unknown task kind '" + std::string(text) + "'");
}

std::string_view edge_policy_name(EdgePolicy policy) {
  switch (policy) {
    case EdgePolicy::Drop: return "drop";
    case EdgePolicy::PadZero: return "pad_zero";
    case EdgePolicy::PadEdge: return "pad_edge";
  }
  return "drop";
}

EdgePolicy parse_edge_policy(std::string_view text) {
  if (text == "drop") return EdgePolicy::Drop;
  if (text == "pad_zero") return EdgePolicy::PadZero;
  if (text == "pad_edge") return EdgePolicy::PadEdge;
  fail(ErrorKind::InvalidArgument, "unknown edge policy '" + std::string(text) + "'");
}

void validate_task(const TaskSpec& task) {
  if (task.in_delays.first > task.in_delays.last) {
    fail(ErrorKind::InvalidArgument, "input delays need a <= b");
  }
  if (task.out_delays.first > task.out_delays.last) {
    fail(ErrorKind::InvalidArgument, "output delays need c <= d");
  }
  if (task.in_components.empty()) fail(ErrorKind::InvalidArgument, "no input components");
  if (task.out_components.empty()) fail(ErrorKind::InvalidArgument, "no output components");
  if (task.kind == TaskKind::Classification) {
    if (task.n_classes < 2) fail(ErrorKind::InvalidArgument, "classification needs n_classes >= 2");
    if (task.out_components.size() != 1) {
      fail(ErrorKind::InvalidArgument, "classification needs exactly one label component");
    }
  }
}

void validate_task(const TaskSpec& task, const TimeSeriesDataset& ds) {
  validate_task(task);
  for (const std::string& name : task.in_components) {
    if (!ds.components[ds.component_index(name)].can_input()) {
      fail(ErrorKind::InvalidArgument, "component '" + name + "' is output-only");
    }
  }
  for (const std::string& name : task.out_components) {
    if (!ds.components[ds.component_index(name)].can_output()) {
      fail(ErrorKind::InvalidArgument, "component '" + name + "' is input-only");
    }
  }
}

bool is_causal(const TaskSpec& task) {
  return task.in_delays.first <= task.in_delays.last && task.in_delays.last < task.out_delays.first &&
         task.out_delays.first <= task.out_delays.last;
}

bool is_autoregressive(const TaskSpec& task) {
  if (!is_causal(task)) return false;
  return std::all_of(task.out_components.begin(), task.out_components.end(), [&](const auto& c) {
    return std::find(task.in_components.begin(), task.in_components.end(), c) !=
           task.in_components.end();
  });
}

bool is_single_step(const TaskSpec& task) { return task.out_delays.first == task.out_delays.last; }

bool is_univariate(const TaskSpec& task) { return task.out_components.size() == 1; }

namespace {

struct Reach {
  int lo;
  int hi;
};

Reach task_reach(const TaskSpec& task) {
  return {std::min(task.in_delays.first, task.out_delays.first),
          std::max(task.in_delays.last, task.out_delays.last)};
}

bool fits(const Reach& reach, std::size_t offset, std::size_t length) {
  const long t = static_cast<long>(offset);
  return t + reach.lo >= 0 && t + reach.hi <= static_cast<long>(length) - 1;
}

}  // namespace

std::vector<PredictionPoint> enumerate_prediction_points(const TimeSeriesDataset& ds,
                                                         const TaskSpec& task,
                                                         const EnumerateOptions& options) {
  validate_task(task);
  if (options.stride < 1) fail(ErrorKind::InvalidArgument, "stride must be >= 1");
  const Reach reach = task_reach(task);
  std::vector<PredictionPoint> all;
  std::size_t global = 0;
  for (std::size_t s = 0; s < ds.slices.size(); ++s) {
    const std::size_t len = ds.slices[s].length();
    for (std::size_t o = 0; o < len; ++o) {
      if (task.edge_policy != EdgePolicy::Drop || fits(reach, o, len)) {
        all.push_back({s, o, global + o});
      }
    }
    global += len;
  }
  std::vector<PredictionPoint> points;
  for (std::size_t i = 0; i < all.size(); i += options.stride) {
    if (options.limit && points.size() >= *options.limit) break;
    points.push_back(all[i]);
  }
  if (points.empty()) {
    fail(ErrorKind::EmptyTask, "no prediction point of dataset '" + ds.name +
                                   "' fits the task windows");
  }
  return points;
}

std::vector<std::size_t> component_indices(const TimeSeriesDataset& ds,
                                           std::span<const std::string> names) {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const std::string& n : names) out.push_back(ds.component_index(n));
  return out;
}

namespace {

// Fills `out` with rows t+first .. t+last of the selected components. Rows
// outside the slice are padded according to the policy.
void fill_window(const Slice& slice, std::size_t offset, const DelayInterval& delays,
                 std::span<const std::size_t> comps, EdgePolicy policy, Matrix& out,
                 std::vector<std::size_t>& padded) {
  const long len = static_cast<long>(slice.length());
  for (std::size_t i = 0; i < delays.length(); ++i) {
    const long row = static_cast<long>(offset) + delays.first + static_cast<long>(i);
    long src = row;
    if (row < 0 || row >= len) {
      padded.push_back(i);
      if (policy == EdgePolicy::PadZero) continue;  // stays zero
      src = std::clamp(row, 0L, len - 1);
    }
    for (std::size_t c = 0; c < comps.size(); ++c) {
      out(i, c) = slice.values(static_cast<std::size_t>(src), comps[c]);
    }
  }
}

void scale_rows(Matrix& m, const ScalerParams& scaler, std::span<const std::size_t> comps,
                const std::vector<std::size_t>& padded, EdgePolicy policy) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const bool zero_pad = policy == EdgePolicy::PadZero &&
                          std::find(padded.begin(), padded.end(), r) != padded.end();
    if (zero_pad) continue;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      m(r, c) = (m(r, c) - scaler.mean[comps[c]]) / scaler.stddev[comps[c]];
    }
  }
}

}  // namespace

WindowPair build_window_pair(const TimeSeriesDataset& ds, const PredictionPoint& t,
                             const TaskSpec& task, const ScalerParams* scaler) {
  validate_task(task);
  if (t.slice >= ds.slices.size() || t.offset >= ds.slices[t.slice].length()) {
    fail(ErrorKind::OutOfRange, "prediction point (slice " + std::to_string(t.slice) + ", row " +
                                    std::to_string(t.offset) + ") is outside the dataset");
  }
  const Slice& slice = ds.slices[t.slice];
  if (task.edge_policy == EdgePolicy::Drop && !fits(task_reach(task), t.offset, slice.length())) {
    fail(ErrorKind::OutOfRange, "prediction point (slice " + std::to_string(t.slice) + ", row " +
                                    std::to_string(t.offset) +
                                    ") needs rows outside its slice under the drop policy");
  }
  const auto in_comps = component_indices(ds, task.in_components);
  const auto out_comps = component_indices(ds, task.out_components);

  WindowPair pair;
  pair.point = t;
  pair.x = Matrix(task.in_length(), in_comps.size());
  fill_window(slice, t.offset, task.in_delays, in_comps, task.edge_policy, pair.x,
              pair.padded_input_rows);
  if (scaler && scaler->scale_inputs) {
    scale_rows(pair.x, *scaler, in_comps, pair.padded_input_rows, task.edge_policy);
  }

  if (task.kind == TaskKind::Regression) {
    pair.y = Matrix(task.out_length(), out_comps.size());
    fill_window(slice, t.offset, task.out_delays, out_comps, task.edge_policy, pair.y,
                pair.padded_output_rows);
    if (scaler && scaler->scale_outputs) {
      scale_rows(pair.y, *scaler, out_comps, pair.padded_output_rows, task.edge_policy);
    }
  } else {
    Matrix raw(1, 1);
    fill_window(slice, t.offset, DelayInterval{task.out_delays.first, task.out_delays.first},
                out_comps, task.edge_policy, raw, pair.padded_output_rows);
    const double value = raw(0, 0);
    const double rounded = std::round(value);
    if (rounded != value || rounded < 0 || rounded >= static_cast<double>(task.n_classes)) {
      fail(ErrorKind::InvalidArgument, "label " + std::to_string(value) + " at row " +
                                           std::to_string(t.global) + " is not a class in [0, " +
                                           std::to_string(task.n_classes) + ")");
    }
    pair.label = static_cast<std::size_t>(rounded);
    pair.y = Matrix(1, task.n_classes);
    pair.y(0, *pair.label) = 1.0;
  }
  return pair;
}

}  // namespace tk::timebase
