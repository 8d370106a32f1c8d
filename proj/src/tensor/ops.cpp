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

#include "tk/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tk/error.hpp"

namespace tk::ops {
namespace {

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  fail(ErrorKind::ShapeMismatch, std::string(op) + ": " + detail);
}

// Number of elements of `b` if it broadcasts along the trailing axes of `a`.
std::size_t trailing_broadcast(const char* op, const Shape& a, const Shape& b) {
  Shape stripped = b;
  while (!stripped.empty() && stripped.front() == 1 && stripped.size() > 1) {
    stripped.erase(stripped.begin());
  }
  if (stripped.size() == 1 && stripped[0] == 1) return 1;
  bool ok = stripped.size() <= a.size() &&
            std::equal(stripped.rbegin(), stripped.rend(), a.rbegin());
  if (!ok) {
    shape_error(op, "cannot broadcast " + shape_string(b) + " onto " + shape_string(a));
  }
  return shape_size(stripped);
}

template <typename Fn, typename Deriv>
Tensor unary(const Tensor& a, const char* op, Fn fn, Deriv deriv) {
  std::vector<double> out(a.size());
  auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(in[i]);
  return make_result(a.shape(), std::move(out), {a}, op,
                     [deriv](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_in[0];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] += ctx.grad_out[i] * deriv(ctx.in_value[0][i], ctx.out_value[i]);
                       }
                     });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::size_t last_extent(const char* op, const Tensor& a) {
  if (a.rank() == 0) shape_error(op, "needs rank >= 1");
  return a.shape().back();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_error("matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * m;
      double* orow = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_result({n, m}, std::move(out), {a, b}, "matmul",
                     [n, k, m](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_out;
                       auto av = ctx.in_value[0];
                       auto bv = ctx.in_value[1];
                       if (!ctx.grad_in[0].empty()) {
                         auto ga = ctx.grad_in[0];
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * bv[p * m + j];
                             ga[i * k + p] += acc;
                           }
                       }
                       if (!ctx.grad_in[1].empty()) {
                         auto gb = ctx.grad_in[1];
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = av[i * k + p];
                             for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += aip * g[i * m + j];
                           }
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t m = trailing_broadcast("add", a.shape(), b.shape());
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % m];
  return make_result(a.shape(), std::move(out), {a, b}, "add",
                     [m](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_out;
                       if (!ctx.grad_in[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) ctx.grad_in[0][i] += g[i];
                       if (!ctx.grad_in[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) ctx.grad_in[1][i % m] += g[i];
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const std::size_t m = trailing_broadcast("sub", a.shape(), b.shape());
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i % m];
  return make_result(a.shape(), std::move(out), {a, b}, "sub",
                     [m](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_out;
                       if (!ctx.grad_in[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) ctx.grad_in[0][i] += g[i];
                       if (!ctx.grad_in[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) ctx.grad_in[1][i % m] -= g[i];
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t m = trailing_broadcast("mul", a.shape(), b.shape());
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i % m];
  return make_result(a.shape(), std::move(out), {a, b}, "mul",
                     [m](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_out;
                       auto av = ctx.in_value[0];
                       auto bv = ctx.in_value[1];
                       if (!ctx.grad_in[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i)
                           ctx.grad_in[0][i] += g[i] * bv[i % m];
                       if (!ctx.grad_in[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i)
                           ctx.grad_in[1][i % m] += g[i] * av[i];
                     });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, "scale", [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, "add_scalar", [value](double x) { return x + value; },
               [](double, double) { return 1.0; });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) shape_error("concat", "no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_error("concat", "axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_error("concat", "rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        shape_error("concat", shape_string(s) + " vs " + shape_string(first));
      }
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis);
  std::vector<std::size_t> offsets;
  std::vector<double> out(shape_size(out_shape));
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t ext = p.shape()[axis];
    auto pv = p.values();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(pv.data() + o * ext * os.inner, ext * os.inner,
                  out.data() + (o * os.extent + offset) * os.inner);
    }
    offset += ext;
  }
  std::vector<std::size_t> extents;
  for (const Tensor& p : parts) extents.push_back(p.shape()[axis]);
  return make_result(out_shape, std::move(out), parts, "concat",
                     [os, offsets, extents](const detail::BackwardContext& ctx) {
                       for (std::size_t k = 0; k < extents.size(); ++k) {
                         auto g = ctx.grad_in[k];
                         if (g.empty()) continue;
                         const std::size_t ext = extents[k];
                         for (std::size_t o = 0; o < os.outer; ++o) {
                           const double* src =
                               ctx.grad_out.data() + (o * os.extent + offsets[k]) * os.inner;
                           double* dst = g.data() + o * ext * os.inner;
                           for (std::size_t i = 0; i < ext * os.inner; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.rank()) shape_error("slice", "axis out of range");
  if (begin >= end || end > a.dim(axis)) {
    shape_error("slice", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") invalid for extent " + std::to_string(a.dim(axis)));
  }
  const AxisSplit s = split_axis(a.shape(), axis);
  const std::size_t len = end - begin;
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  std::vector<double> out(shape_size(out_shape));
  auto av = a.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(av.data() + (o * s.extent + begin) * s.inner, len * s.inner,
                out.data() + o * len * s.inner);
  }
  return make_result(out_shape, std::move(out), {a}, "slice",
                     [s, begin, len](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_in[0];
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         const double* src = ctx.grad_out.data() + o * len * s.inner;
                         double* dst = g.data() + (o * s.extent + begin) * s.inner;
                         for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
                       }
                     });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  return slice(a, 0, begin, end);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    shape_error("reshape", shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a}, "reshape",
                     [](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_in[0];
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i];
                     });
}

Tensor flatten(const Tensor& a) {
  if (a.rank() < 1) shape_error("flatten", "needs rank >= 1");
  const std::size_t lead = a.dim(0);
  return reshape(a, {lead, lead == 0 ? 0 : a.size() / lead});
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) shape_error("transpose", "needs rank 2, got " + shape_string(a.shape()));
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n * m);
  auto av = a.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = av[i * m + j];
  return make_result({m, n}, std::move(out), {a}, "transpose",
                     [n, m](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_in[0];
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < m; ++j) g[i * m + j] += ctx.grad_out[j * n + i];
                     });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result({}, {acc}, {a}, "sum", [](const detail::BackwardContext& ctx) {
    const double g = ctx.grad_out[0];
    for (double& x : ctx.grad_in[0]) x += g;
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) shape_error("mean", "empty tensor");
  const double n = static_cast<double>(a.size());
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result({}, {acc / n}, {a}, "mean", [n](const detail::BackwardContext& ctx) {
    const double g = ctx.grad_out[0] / n;
    for (double& x : ctx.grad_in[0]) x += g;
  });
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) shape_error("mean_axis", "axis out of range");
  const AxisSplit s = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto av = a.values();
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += av[(o * s.extent + e) * s.inner + i];
  for (double& v : out) v *= inv;
  return make_result(std::move(out_shape), std::move(out), {a}, "mean_axis",
                     [s, inv](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_in[0];
                       for (std::size_t o = 0; o < s.outer; ++o)
                         for (std::size_t e = 0; e < s.extent; ++e)
                           for (std::size_t i = 0; i < s.inner; ++i)
                             g[(o * s.extent + e) * s.inner + i] +=
                                 inv * ctx.grad_out[o * s.inner + i];
                     });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(a, "abs", [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t n = last_extent("softmax_rows", a);
  const std::size_t rows = n == 0 ? 0 : a.size() / n;
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * n;
    double* y = out.data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  return make_result(a.shape(), std::move(out), {a}, "softmax_rows",
                     [rows, n](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_in[0];
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = ctx.out_value.data() + r * n;
                         const double* go = ctx.grad_out.data() + r * n;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += go[j] * y[j];
                         for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (go[j] - dot);
                       }
                     });
}

Tensor log_softmax_rows(const Tensor& a) {
  const std::size_t n = last_extent("log_softmax_rows", a);
  const std::size_t rows = n == 0 ? 0 : a.size() / n;
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x[j] - lse;
  }
  return make_result(a.shape(), std::move(out), {a}, "log_softmax_rows",
                     [rows, n](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_in[0];
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = ctx.out_value.data() + r * n;
                         const double* go = ctx.grad_out.data() + r * n;
                         double total = 0.0;
                         for (std::size_t j = 0; j < n; ++j) total += go[j];
                         for (std::size_t j = 0; j < n; ++j)
                           g[r * n + j] += go[j] - std::exp(y[j]) * total;
                       }
                     });
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
  const std::size_t n = last_extent("layer_norm_rows", a);
  const std::size_t rows = n == 0 ? 0 : a.size() / n;
  std::vector<double> out(a.size());
  std::vector<double> inv_std(rows);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = (x[j] - mu) * inv_std[r];
  }
  return make_result(a.shape(), std::move(out), {a}, "layer_norm_rows",
                     [rows, n, inv_std](const detail::BackwardContext& ctx) {
                       auto g = ctx.grad_in[0];
                       const double dn = static_cast<double>(n);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* xh = ctx.out_value.data() + r * n;
                         const double* go = ctx.grad_out.data() + r * n;
                         double mean_g = 0.0, mean_gx = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           mean_g += go[j];
                           mean_gx += go[j] * xh[j];
                         }
                         mean_g /= dn;
                         mean_gx /= dn;
                         for (std::size_t j = 0; j < n; ++j)
                           g[r * n + j] += inv_std[r] * (go[j] - mean_g - xh[j] * mean_gx);
                       }
                     });
}

Tensor conv1d(const Tensor& x, const Tensor& kernels, int dilation, bool causal) {
  if (dilation < 1) {
    fail(ErrorKind::NonPositiveDilation, "conv1d: dilation must be >= 1, got " +
                                             std::to_string(dilation));
  }
  if (x.rank() != 2 && x.rank() != 3) shape_error("conv1d", "input must be (L, C) or (B, L, C)");
  if (kernels.rank() != 3) shape_error("conv1d", "kernels must be (k, C_in, C_out)");
  const bool batched = x.rank() == 3;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t len = x.dim(batched ? 1 : 0);
  const std::size_t cin = x.dim(batched ? 2 : 1);
  const std::size_t k = kernels.dim(0);
  const std::size_t cout = kernels.dim(2);
  if (kernels.dim(1) != cin) {
    shape_error("conv1d", "kernel expects " + std::to_string(kernels.dim(1)) +
                              " input channels, got " + std::to_string(cin));
  }
  if (k == 0) shape_error("conv1d", "kernel size must be >= 1");
  const std::size_t reach = (k - 1) * static_cast<std::size_t>(dilation);
  if (!causal && reach >= len) {
    shape_error("conv1d", "non-causal conv with reach " + std::to_string(reach) +
                              " leaves no output for length " + std::to_string(len));
  }
  const std::size_t out_len = causal ? len : len - reach;
  const std::ptrdiff_t pad = causal ? static_cast<std::ptrdiff_t>(reach) : 0;
  const auto d = static_cast<std::ptrdiff_t>(dilation);

  std::vector<double> out(batch * out_len * cout, 0.0);
  auto xv = x.values();
  auto wv = kernels.values();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t p = 0; p < out_len; ++p) {
      double* orow = out.data() + (b * out_len + p) * cout;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(j) * d - pad;
        if (q < 0) continue;
        const double* xrow = xv.data() + (b * len + static_cast<std::size_t>(q)) * cin;
        for (std::size_t c = 0; c < cin; ++c) {
          const double xc = xrow[c];
          const double* wrow = wv.data() + (j * cin + c) * cout;
          for (std::size_t o = 0; o < cout; ++o) orow[o] += xc * wrow[o];
        }
      }
    }
  }
  Shape out_shape = batched ? Shape{batch, out_len, cout} : Shape{out_len, cout};
  return make_result(
      std::move(out_shape), std::move(out), {x, kernels}, "conv1d",
      [=](const detail::BackwardContext& ctx) {
        auto xv = ctx.in_value[0];
        auto wv = ctx.in_value[1];
        auto gx = ctx.grad_in[0];
        auto gw = ctx.grad_in[1];
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t p = 0; p < out_len; ++p) {
            const double* go = ctx.grad_out.data() + (b * out_len + p) * cout;
            for (std::size_t j = 0; j < k; ++j) {
              const std::ptrdiff_t q =
                  static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(j) * d - pad;
              if (q < 0) continue;
              const std::size_t xoff = (b * len + static_cast<std::size_t>(q)) * cin;
              for (std::size_t c = 0; c < cin; ++c) {
                const std::size_t woff = (j * cin + c) * cout;
                if (!gx.empty()) {
                  double acc = 0.0;
                  for (std::size_t o = 0; o < cout; ++o) acc += go[o] * wv[woff + o];
                  gx[xoff + c] += acc;
                }
                if (!gw.empty()) {
                  const double xc = xv[xoff + c];
                  for (std::size_t o = 0; o < cout; ++o) gw[woff + o] += xc * go[o];
                }
              }
            }
          }
        }
      });
}

}  // namespace tk::ops
