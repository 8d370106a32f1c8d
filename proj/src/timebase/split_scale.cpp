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
#include <numeric>
#include <string>

#include "tk/error.hpp"
#include "tk/timebase.hpp"

namespace tk::timebase {

SplitMode parse_split_mode(std::string_view text) {
  if (text == "chronological") return SplitMode::Chronological;
  if (text == "by_slice") return SplitMode::BySlice;
  fail(ErrorKind::InvalidArgument, "unknown split mode '" + std::string(text) + "'");
}

namespace {

constexpr const char* kSplitNames[3] = {"train", "val", "eval"};

std::vector<PredictionPoint>& split_ref(SplitAssignment& s, std::size_t i) {
  return i == 0 ? s.train : (i == 1 ? s.val : s.eval);
}

}  // namespace

SplitAssignment split_points(std::span<const PredictionPoint> points,
                             const std::array<double, 3>& fractions, SplitMode mode) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) fail(ErrorKind::InvalidArgument, "split fractions must be non-negative");
    total += f;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    fail(ErrorKind::InvalidArgument, "split fractions must sum to 1, got " + std::to_string(total));
  }

  SplitAssignment out;
  out.fractions = fractions;
  const std::size_t n = points.size();
  const double dn = static_cast<double>(n);

  if (mode == SplitMode::Chronological) {
    // Tolerance absorbs representation error such as 0.7 * 10 = 7.000000000000001.
    std::size_t n_train = std::min(n, static_cast<std::size_t>(std::floor(fractions[0] * dn + 1e-9)));
    std::size_t n_val =
        std::min(n - n_train, static_cast<std::size_t>(std::floor(fractions[1] * dn + 1e-9)));
    out.train.assign(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val.assign(points.begin() + static_cast<std::ptrdiff_t>(n_train),
                   points.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.eval.assign(points.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), points.end());
  } else {
    const double budget[3] = {fractions[0] * dn, fractions[1] * dn, fractions[2] * dn};
    std::size_t current = 0;
    std::size_t begin = 0;
    while (begin < n) {
      std::size_t end = begin;
      while (end < n && points[end].slice == points[begin].slice) ++end;
      while (current < 2 &&
             (fractions[current] == 0.0 ||
              static_cast<double>(split_ref(out, current).size()) >= budget[current] - 1e-9)) {
        ++current;
      }
      auto& dst = split_ref(out, current);
      dst.insert(dst.end(), points.begin() + static_cast<std::ptrdiff_t>(begin),
                 points.begin() + static_cast<std::ptrdiff_t>(end));
      begin = end;
    }
  }

  for (std::size_t i = 0; i < 3; ++i) {
    if (fractions[i] > 0.0 && split_ref(out, i).empty()) {
      fail(ErrorKind::DegenerateSplit, std::string(kSplitNames[i]) + " split has fraction " +
                                           std::to_string(fractions[i]) + " but receives no points");
    }
  }
  return out;
}

ScalerParams fit_scaler(const TimeSeriesDataset& ds, const TaskSpec& task,
                        std::span<const PredictionPoint> train, bool scale_inputs,
                        bool scale_outputs) {
  const std::size_t nc = ds.n_components();
  ScalerParams params;
  params.mean.assign(nc, 0.0);
  params.stddev.assign(nc, 1.0);
  params.zero_variance.assign(nc, false);
  params.scale_inputs = scale_inputs;
  params.scale_outputs = scale_outputs && task.kind == TaskKind::Regression;

  // used[c][global row] marks dataset rows a train window reads for component c.
  std::vector<std::vector<char>> used(nc);
  const std::size_t n_total = ds.n_total();
  std::vector<std::size_t> offsets(ds.slices.size());
  for (std::size_t s = 0; s < ds.slices.size(); ++s) offsets[s] = ds.slice_offset(s);

  auto mark = [&](const PredictionPoint& p, const DelayInterval& delays,
                  const std::vector<std::string>& names) {
    const long len = static_cast<long>(ds.slices[p.slice].length());
    for (const std::string& name : names) {
      const std::size_t c = ds.component_index(name);
      if (used[c].empty()) used[c].assign(n_total, 0);
      for (int d = delays.first; d <= delays.last; ++d) {
        const long row = static_cast<long>(p.offset) + d;
        if (row < 0 || row >= len) continue;
        used[c][offsets[p.slice] + static_cast<std::size_t>(row)] = 1;
      }
    }
  };
  for (const PredictionPoint& p : train) {
    if (params.scale_inputs) mark(p, task.in_delays, task.in_components);
    if (params.scale_outputs) mark(p, task.out_delays, task.out_components);
  }

  for (std::size_t c = 0; c < nc; ++c) {
    if (used[c].empty()) continue;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < ds.slices.size(); ++s)
      for (std::size_t r = 0; r < ds.slices[s].length(); ++r)
        if (used[c][offsets[s] + r]) {
          sum += ds.slices[s].values(r, c);
          ++count;
        }
    if (count == 0) continue;
    const double mu = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t s = 0; s < ds.slices.size(); ++s)
      for (std::size_t r = 0; r < ds.slices[s].length(); ++r)
        if (used[c][offsets[s] + r]) {
          const double dv = ds.slices[s].values(r, c) - mu;
          sq += dv * dv;
        }
    const double sd = std::sqrt(sq / static_cast<double>(count));
    params.mean[c] = mu;
    if (sd <= 1e-12 * std::max(1.0, std::fabs(mu))) {
      params.stddev[c] = 1.0;
      params.zero_variance[c] = true;
    } else {
      params.stddev[c] = sd;
    }
  }
  return params;
}

Matrix apply_scaler(const Matrix& m, const ScalerParams& params,
                    std::span<const std::size_t> components) {
  if (components.size() != m.cols()) {
    fail(ErrorKind::ShapeMismatch, "scaler: matrix has " + std::to_string(m.cols()) +
                                       " columns for " + std::to_string(components.size()) +
                                       " components");
  }
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      out(r, c) = (m(r, c) - params.mean[components[c]]) / params.stddev[components[c]];
  return out;
}

Matrix invert_scaler(const Matrix& m, const ScalerParams& params,
                     std::span<const std::size_t> components) {
  if (components.size() != m.cols()) {
    fail(ErrorKind::ShapeMismatch, "scaler: matrix has " + std::to_string(m.cols()) +
                                       " columns for " + std::to_string(components.size()) +
                                       " components");
  }
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      out(r, c) = m(r, c) * params.stddev[components[c]] + params.mean[components[c]];
  return out;
}

}  // namespace tk::timebase
