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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tk/architectures.hpp"
#include "tk/matrix.hpp"
#include "tk/trainer.hpp"

namespace tk::interp {

enum class SelectionMode { Random, Best, Worst, Explicit };

struct SelectionSpec {
  SelectionMode mode = SelectionMode::Random;
  std::size_t k = 5;
  trainer::Split split = trainer::Split::Val;
  std::uint64_t seed = 0;
  std::vector<std::size_t> indices;  // explicit mode
};

// Positions into the per-point loss list, which is in chronological order.
// Best/worst ties go to the earlier point. Errors: KTooLarge; OutOfRange for
// explicit indices past the end.
std::vector<std::size_t> select_points(std::span<const double> losses, const SelectionSpec& spec);

// Maps a batch of input windows (B, L, C) to one scalar per row, shape (B).
// Rows must not interact.
using BatchScalar = std::function<Tensor(const Tensor&)>;

struct Attribution {
  Matrix scores;  // L x C
  double output = 0.0;           // F(x)
  double baseline_output = 0.0;  // F(x')
  double gap = 0.0;              // |sum(scores) - (F(x) - F(x'))|
};

// Midpoint rule over m interpolants, evaluated in batches.
// Errors: NonFiniteGradient, InvalidArgument for m == 0 or shape mismatch.
Attribution integrated_gradients(const BatchScalar& f, const Matrix& x, const Matrix& baseline,
                                 std::size_t m);
Attribution grad_x_input(const BatchScalar& f, const Matrix& x);

struct Patch {
  std::size_t rows = 1;
  std::size_t cols = 1;
};
// Each cell receives F(x) - F(x with its patch set to the baseline). Patches
// tile the window from the top-left corner.
Attribution occlusion(const BatchScalar& f, const Matrix& x, const Matrix& baseline,
                      const Patch& patch = {});

struct Target {
  std::size_t row = 0;
  std::size_t col = 0;
};

// Scalar output `target` of `model`; stateful models start every call from a
// zero carry.
BatchScalar model_output(arch::Model& model, const Target& target);

struct Importance {
  Matrix mean_abs;                     // L x C
  std::vector<double> per_component;   // column means
  std::vector<double> per_delay;       // row means
};

// Errors: EmptyResults, ShapeMismatch.
Importance aggregate_importance(std::span<const Matrix> attributions);

enum class Method { IntegratedGradients, GradXInput, Occlusion };
enum class BaselineKind { Zero, TrainMean, Custom };

std::string_view method_name(Method method);

struct AttributionRequest {
  Method method = Method::IntegratedGradients;
  std::optional<Target> target;  // regression: required; classification: defaults to predicted class
  BaselineKind baseline = BaselineKind::TrainMean;
  Matrix custom_baseline;
  std::size_t ig_steps = 64;
  Patch patch;
  SelectionSpec selection;
};

// Errors: ConfigError.
AttributionRequest request_from_json(const nlohmann::json& j);
nlohmann::json request_to_json(const AttributionRequest& request);

struct PointAttribution {
  std::size_t position = 0;  // index within the split
  timebase::PredictionPoint point;
  Target target;
  Attribution attribution;
  Matrix input_scaled;
  Matrix input_raw;
  double loss = 0.0;
};

struct Interpretation {
  AttributionRequest request;
  std::vector<PointAttribution> points;
  Importance importance;
};

Interpretation interpret(arch::Model& model, const trainer::PreparedData& data,
                         const AttributionRequest& request);

}  // namespace tk::interp
