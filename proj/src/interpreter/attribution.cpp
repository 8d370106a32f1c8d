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
#include <random>

#include "tk/error.hpp"
#include "tk/interpreter.hpp"
#include "tk/ops.hpp"

namespace tk::interp {

namespace {

constexpr std::size_t kChunk = 256;

Tensor stack_rows(const std::vector<Matrix>& ms) {
  const std::size_t r = ms.front().rows(), c = ms.front().cols();
  std::vector<double> v;
  v.reserve(ms.size() * r * c);
  for (const Matrix& m : ms) v.insert(v.end(), m.values().begin(), m.values().end());
  return Tensor({ms.size(), r, c}, std::move(v));
}

std::vector<double> evaluate_rows(const BatchScalar& f, const std::vector<Matrix>& xs) {
  NoGradGuard guard;
  const Tensor out = f(stack_rows(xs));
  if (out.size() != xs.size()) {
    fail(ErrorKind::ShapeMismatch, "attribution target must yield one scalar per window");
  }
  return {out.values().begin(), out.values().end()};
}

// Sum over rows of dF/dx for every window in `xs`, returned per window.
std::vector<double> gradient_sum(const BatchScalar& f, const std::vector<Matrix>& xs) {
  const Tensor x = stack_rows(xs);
  Tensor leaf(x.shape(), {x.values().begin(), x.values().end()}, true);
  const Tensor out = f(leaf);
  if (out.size() != xs.size()) {
    fail(ErrorKind::ShapeMismatch, "attribution target must yield one scalar per window");
  }
  const Tensor wrt[] = {leaf};
  auto g = gradients(ops::sum(out), wrt);
  for (double v : g[0]) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFiniteGradient, "attribution gradient is not finite");
  }
  return std::move(g[0]);
}

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::InvalidArgument, "baseline shape differs from the input window");
  }
}

void finish(Attribution& a) {
  double total = 0.0;
  for (double v : a.scores.values()) total += v;
  a.gap = std::abs(total - (a.output - a.baseline_output));
}

}  // namespace

std::vector<std::size_t> select_points(std::span<const double> losses, const SelectionSpec& spec) {
  const std::size_t n = losses.size();
  if (spec.mode == SelectionMode::Explicit) {
    if (spec.indices.empty()) fail(ErrorKind::InvalidArgument, "explicit selection needs indices");
    for (std::size_t i : spec.indices) {
      if (i >= n) {
        fail(ErrorKind::OutOfRange, "point index " + std::to_string(i) + " is outside the split (" +
                                        std::to_string(n) + " points)");
      }
    }
    return spec.indices;
  }
  if (spec.k == 0) fail(ErrorKind::InvalidArgument, "selection count k must be >= 1");
  if (spec.k > n) {
    fail(ErrorKind::KTooLarge, "asked for " + std::to_string(spec.k) + " points but the split holds " +
                                   std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  switch (spec.mode) {
    case SelectionMode::Best:
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
      break;
    case SelectionMode::Worst:
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
      break;
    case SelectionMode::Random: {
      std::mt19937_64 rng(spec.seed);
      for (std::size_t i = 0; i < spec.k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      break;
    }
    case SelectionMode::Explicit: break;
  }
  order.resize(spec.k);
  return order;
}

Attribution integrated_gradients(const BatchScalar& f, const Matrix& x, const Matrix& baseline,
                                 std::size_t m) {
  if (m == 0) fail(ErrorKind::InvalidArgument, "integrated gradients needs m >= 1");
  check_same_shape(x, baseline);
  Attribution a;
  const auto ends = evaluate_rows(f, {x, baseline});
  a.output = ends[0];
  a.baseline_output = ends[1];

  const std::size_t cells = x.values().size();
  std::vector<double> total(cells, 0.0);
  for (std::size_t start = 0; start < m; start += kChunk) {
    const std::size_t count = std::min(kChunk, m - start);
    std::vector<Matrix> path;
    path.reserve(count);
    for (std::size_t s = start; s < start + count; ++s) {
      const double alpha = (static_cast<double>(s) + 0.5) / static_cast<double>(m);
      Matrix p(x.rows(), x.cols());
      for (std::size_t i = 0; i < cells; ++i) {
        p.values()[i] = baseline.values()[i] + alpha * (x.values()[i] - baseline.values()[i]);
      }
      path.push_back(std::move(p));
    }
    const auto g = gradient_sum(f, path);
    for (std::size_t s = 0; s < count; ++s) {
      for (std::size_t i = 0; i < cells; ++i) total[i] += g[s * cells + i];
    }
  }
  a.scores = Matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < cells; ++i) {
    a.scores.values()[i] = (x.values()[i] - baseline.values()[i]) * (total[i] / static_cast<double>(m));
  }
  finish(a);
  return a;
}

Attribution grad_x_input(const BatchScalar& f, const Matrix& x) {
  Attribution a;
  a.output = evaluate_rows(f, {x})[0];
  const auto g = gradient_sum(f, {x});
  a.scores = Matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < g.size(); ++i) a.scores.values()[i] = x.values()[i] * g[i];
  a.baseline_output = evaluate_rows(f, {Matrix(x.rows(), x.cols())})[0];
  finish(a);
  return a;
}

Attribution occlusion(const BatchScalar& f, const Matrix& x, const Matrix& baseline, const Patch& patch) {
  check_same_shape(x, baseline);
  if (patch.rows == 0 || patch.cols == 0) fail(ErrorKind::InvalidArgument, "patch spans must be >= 1");
  struct Box {
    std::size_t r0, r1, c0, c1;
  };
  std::vector<Box> boxes;
  std::vector<Matrix> variants{x, baseline};
  for (std::size_t r = 0; r < x.rows(); r += patch.rows) {
    for (std::size_t c = 0; c < x.cols(); c += patch.cols) {
      Box b{r, std::min(x.rows(), r + patch.rows), c, std::min(x.cols(), c + patch.cols)};
      Matrix v = x;
      for (std::size_t i = b.r0; i < b.r1; ++i)
        for (std::size_t j = b.c0; j < b.c1; ++j) v(i, j) = baseline(i, j);
      boxes.push_back(b);
      variants.push_back(std::move(v));
    }
  }
  std::vector<double> out;
  for (std::size_t start = 0; start < variants.size(); start += kChunk) {
    std::vector<Matrix> chunk(variants.begin() + static_cast<std::ptrdiff_t>(start),
                              variants.begin() + static_cast<std::ptrdiff_t>(std::min(variants.size(), start + kChunk)));
    const auto part = evaluate_rows(f, chunk);
    out.insert(out.end(), part.begin(), part.end());
  }
  Attribution a;
  a.output = out[0];
  a.baseline_output = out[1];
  a.scores = Matrix(x.rows(), x.cols());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const Box& b = boxes[k];
    const double diff = out[0] - out[k + 2];
    for (std::size_t i = b.r0; i < b.r1; ++i)
      for (std::size_t j = b.c0; j < b.c1; ++j) a.scores(i, j) = diff;
  }
  finish(a);
  return a;
}

BatchScalar model_output(arch::Model& model, const Target& target) {
  const std::size_t rows = model.shape().classification ? 1 : model.shape().out_len;
  const std::size_t cols = model.shape().out_width;
  if (target.row >= rows || target.col >= cols) {
    fail(ErrorKind::InvalidArgument, "target (" + std::to_string(target.row) + ", " +
                                         std::to_string(target.col) + ") is outside the " +
                                         std::to_string(rows) + "x" + std::to_string(cols) + " output");
  }
  const std::size_t index = target.row * cols + target.col;
  return [&model, index, rows, cols](const Tensor& xb) {
    if (model.stateful()) model.reset_state();
    const std::size_t b = xb.dim(0);
    Tensor flat = ops::reshape(model.forward(xb), {b, rows * cols});
    Tensor out = ops::reshape(ops::slice(flat, 1, index, index + 1), {b});
    if (model.stateful()) model.reset_state();
    return out;
  };
}

Importance aggregate_importance(std::span<const Matrix> attributions) {
  if (attributions.empty()) fail(ErrorKind::EmptyResults, "no attributions to aggregate");
  const std::size_t r = attributions.front().rows(), c = attributions.front().cols();
  Importance imp;
  imp.mean_abs = Matrix(r, c);
  for (const Matrix& a : attributions) {
    if (a.rows() != r || a.cols() != c) {
      fail(ErrorKind::ShapeMismatch, "attribution matrices differ in shape");
    }
    for (std::size_t i = 0; i < r * c; ++i) imp.mean_abs.values()[i] += std::abs(a.values()[i]);
  }
  for (double& v : imp.mean_abs.values()) v /= static_cast<double>(attributions.size());
  imp.per_component.assign(c, 0.0);
  imp.per_delay.assign(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      imp.per_delay[i] += imp.mean_abs(i, j) / static_cast<double>(c);
      imp.per_component[j] += imp.mean_abs(i, j) / static_cast<double>(r);
    }
  }
  return imp;
}

}  // namespace tk::interp
