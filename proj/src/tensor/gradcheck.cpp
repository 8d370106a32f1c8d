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

#include "tk/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tk/error.hpp"

namespace tk {

GradCheckResult check_gradients(const ScalarFunction& fn, std::vector<Tensor> inputs,
                                const GradCheckOptions& options) {
  for (Tensor& in : inputs) {
    if (!in.is_leaf()) fail(ErrorKind::InvalidArgument, "gradient check inputs must be leaves");
    in.set_requires_grad(true);
  }
  const std::vector<std::vector<double>> analytic = gradients(fn(inputs), inputs);

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    std::span<double> values = inputs[t].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto central = [&](double h) {
        values[i] = saved + h;
        const double up = fn(inputs).item();
        values[i] = saved - h;
        const double down = fn(inputs).item();
        values[i] = saved;
        return (up - down) / (2.0 * h);
      };
      double numeric = central(options.step);
      if (options.extrapolate) {
        // Richardson extrapolation of two central differences.
        numeric = (4.0 * central(0.5 * options.step) - numeric) / 3.0;
      }
      const double a = analytic[t][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), options.floor});
      const double err = std::fabs(a - numeric) / denom;
      ++result.checked;
      if (err > result.max_error || !std::isfinite(err)) {
        result.max_error = std::isfinite(err) ? err : INFINITY;
        result.worst_input = t;
        result.worst_element = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  result.ok = result.max_error < options.tolerance;
  return result;
}

}  // namespace tk
