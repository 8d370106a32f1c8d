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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "tk/tensor.hpp"

namespace tk {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  double floor = 1e-7;
  bool extrapolate = false;  // combine steps h and h/2 to cancel the O(h^2) error
};

struct GradCheckResult {
  bool ok = true;
  double max_error = 0.0;  // max over elements of |a - n| / max(|a|, |n|, floor)
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares reverse-mode gradients of `fn` against central finite differences
// for every element of every tensor in `inputs`.
// Inputs must be leaves; their values are perturbed in place and restored.
GradCheckResult check_gradients(const ScalarFunction& fn, std::vector<Tensor> inputs,
                                const GradCheckOptions& options = {});

}  // namespace tk
