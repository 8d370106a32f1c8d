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
#include <vector>

#include "tk/tensor.hpp"

// Differentiable primitives. Every op checks shapes eagerly and throws
// tk::Error{ShapeMismatch} on incompatible operands.
//
// Binary elementwise ops (add, sub, mul) accept a right operand whose shape
// is a trailing suffix of the left operand's shape (leading 1s ignored), so
// a bias of shape (C) broadcasts over (B, L, C).
namespace tk::ops {

Tensor matmul(const Tensor& a, const Tensor& b);  // (n, k) x (k, m) -> (n, m)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
// (d0, d1, ..., dn) -> (d0, d1 * ... * dn)
Tensor flatten(const Tensor& a);
Tensor transpose(const Tensor& a);  // 2-D only

Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
Tensor mean_axis(const Tensor& a, std::size_t axis);  // removes `axis`

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);

// Row-wise over the last axis.
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
// Zero-mean, unit-variance normalization over the last axis (no affine part).
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-5);

// One-dimensional convolution over time.
//   x:       (L, C_in) or (B, L, C_in)
//   kernels: (k, C_in, C_out)
// Causal mode left-pads (k - 1) * dilation zeros so output position p sees
// only inputs at positions <= p; output length is L. Non-causal mode uses no
// padding and yields length L - (k - 1) * dilation. Dilation must be >= 1.
Tensor conv1d(const Tensor& x, const Tensor& kernels, int dilation, bool causal);

}  // namespace tk::ops
