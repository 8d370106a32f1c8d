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

#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "tk/error.hpp"
#include "tk/gradcheck.hpp"
#include "tk/ops.hpp"

using namespace tk;
using tk::testing::random_tensor;

namespace {

// Direct convolution on an explicitly zero-padded copy of the input.
std::vector<double> reference_conv(const std::vector<double>& x, std::size_t len, std::size_t cin,
                                   const std::vector<double>& w, std::size_t k, std::size_t cout,
                                   std::size_t dilation, bool causal) {
  const std::size_t reach = (k - 1) * dilation;
  const std::size_t pad = causal ? reach : 0;
  std::vector<double> padded((len + pad) * cin, 0.0);
  std::copy(x.begin(), x.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad * cin));
  const std::size_t out_len = len + pad - reach;
  std::vector<double> y(out_len * cout, 0.0);
  for (std::size_t p = 0; p < out_len; ++p)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < cin; ++c)
          y[p * cout + o] += padded[(p + j * dilation) * cin + c] * w[(j * cin + c) * cout + o];
  return y;
}

}  // namespace

TEST_CASE("conv1d hand examples") {
  Tensor x({3, 1}, {1, 2, 3});
  Tensor k({2, 1, 1}, {1, 1});
  auto causal = ops::conv1d(x, k, 1, true);
  CHECK(causal.shape() == Shape{3, 1});
  CHECK(std::vector<double>(causal.values().begin(), causal.values().end()) ==
        std::vector<double>{1, 3, 5});
  auto valid = ops::conv1d(x, k, 1, false);
  CHECK(valid.shape() == Shape{2, 1});
  CHECK(std::vector<double>(valid.values().begin(), valid.values().end()) ==
        std::vector<double>{3, 5});
}

TEST_CASE("conv1d matches padded direct convolution") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t len = 3 + rng() % 10, cin = 1 + rng() % 3, cout = 1 + rng() % 3;
    const std::size_t k = 1 + rng() % 3, dil = 1 + rng() % 3;
    const bool causal = trial % 2 == 0;
    if (!causal && (k - 1) * dil >= len) continue;
    Tensor x = random_tensor(rng, {len, cin});
    Tensor w = random_tensor(rng, {k, cin, cout});
    auto y = ops::conv1d(x, w, static_cast<int>(dil), causal);
    auto ref = reference_conv({x.values().begin(), x.values().end()}, len, cin,
                              {w.values().begin(), w.values().end()}, k, cout, dil, causal);
    REQUIRE(y.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv1d errors") {
  Tensor x({3, 1}, {1, 2, 3});
  Tensor k({2, 1, 1}, {1, 1});
  try {
    ops::conv1d(x, k, 0, true);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonPositiveDilation);
  }
  Tensor wrong({2, 2, 1}, {1, 1, 1, 1});
  CHECK_THROWS_AS(ops::conv1d(x, wrong, 1, true), Error);
  Tensor long_kernel({4, 1, 1}, {1, 1, 1, 1});
  CHECK_THROWS_AS(ops::conv1d(x, long_kernel, 1, false), Error);
}

TEST_CASE("causal conv output ignores later positions") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor(rng, {2, 9, 2});
  Tensor w = random_tensor(rng, {3, 2, 4});
  auto base = ops::conv1d(x, w, 2, true);
  for (std::size_t q = 0; q < 9; ++q) {
    std::vector<double> v(x.values().begin(), x.values().end());
    v[(0 * 9 + q) * 2] += 5.0;
    v[(1 * 9 + q) * 2 + 1] -= 3.0;
    auto y = ops::conv1d(Tensor({2, 9, 2}, v), w, 2, true);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t p = 0; p < q; ++p)
        for (std::size_t o = 0; o < 4; ++o) {
          const std::size_t i = (b * 9 + p) * 4 + o;
          CHECK(y.values()[i] == base.values()[i]);
        }
  }
}

TEST_CASE("matmul identity") {
  std::mt19937_64 rng(3);
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor a = random_tensor(rng, {2, 2});
  auto c = ops::matmul(eye, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c.values()[i] == a.values()[i]);
  CHECK_THROWS_AS(ops::matmul(a, Tensor::zeros({3, 1})), Error);
}

TEST_CASE("backward analytic examples") {
  Tensor x({2}, {1, 2}, true);
  backward(ops::sum(ops::mul(x, x)));
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);

  Tensor z = Tensor::zeros({3}, true);
  backward(ops::sum(ops::sigmoid(z)));
  for (double g : z.grad()) CHECK(g == 0.25);
}

TEST_CASE("backward errors and disconnected leaves") {
  Tensor x({2}, {1, 2}, true);
  try {
    backward(ops::mul(x, x));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotScalar);
  }
  Tensor y({2}, {3, 4}, true);
  std::vector<Tensor> leaves{x, y};
  auto report = backward(ops::sum(x), leaves);
  CHECK(report.disconnected_leaves == 1);
  REQUIRE(y.has_grad());
  CHECK(y.grad()[0] == 0.0);
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("tape is topologically ordered and cleared by backward") {
  Tensor a({2}, {1, 2}, true);
  Tensor b({2}, {3, 4}, true);
  Tensor h = ops::tanh(ops::mul(a, b));
  Tensor loss = ops::sum(ops::add(h, a));
  Tape tape = Tape::record(loss);
  REQUIRE(tape.size() == 6);
  std::vector<const detail::Node*> seen;
  for (const TapeEntry& e : tape.entries()) {
    for (const auto& in : e.node->inputs) {
      if (!in->requires_grad) continue;
      CHECK(std::find(seen.begin(), seen.end(), in.get()) != seen.end());
    }
    seen.push_back(e.node);
  }
  CHECK(seen.back() == loss.id());
  backward(loss);
  CHECK(Tape::record(loss).size() == 0);
  CHECK(h.is_leaf());
}

TEST_CASE("no-grad guard suppresses recording") {
  Tensor a({2}, {1, 2}, true);
  NoGradGuard guard;
  Tensor y = ops::mul(a, a);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("gradients() leaves stored grads untouched") {
  Tensor a({2}, {1, 2}, true);
  std::vector<Tensor> wrt{a};
  auto g = gradients(ops::sum(ops::square(a)), wrt);
  CHECK(g[0] == std::vector<double>{2.0, 4.0});
  CHECK_FALSE(a.has_grad());
}

TEST_CASE("softmax rows are distributions") {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor(rng, {6, 5}, -20.0, 20.0);
  auto s = ops::softmax_rows(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      const double v = s.values()[r * 5 + j];
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      total += v;
    }
    CHECK(std::fabs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("broadcasting shapes") {
  Tensor a = Tensor::full({2, 3, 4}, 1.0);
  Tensor bias({4}, {1, 2, 3, 4});
  auto y = ops::add(a, bias);
  CHECK(y.values()[5] == 3.0);
  Tensor row({1, 4}, {1, 2, 3, 4});
  CHECK(ops::mul(a, row).values()[7] == 4.0);
  CHECK_THROWS_AS(ops::add(a, Tensor::zeros({3})), Error);
}

// Every primitive against central finite differences.
TEST_CASE("primitive gradient checks") {
  std::mt19937_64 rng(42);
  GradCheckOptions opt;
  auto check = [&](const char* name, const ScalarFunction& fn, std::vector<Tensor> inputs) {
    auto r = check_gradients(fn, std::move(inputs), opt);
    INFO(name << " max error " << r.max_error << " analytic " << r.worst_analytic
              << " numeric " << r.worst_numeric);
    CHECK(r.ok);
  };
  // A fixed random projection turns any tensor into a scalar with
  // non-uniform upstream gradients.
  auto project = [](const Tensor& t) {
    std::vector<double> w(t.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.0 + 0.7 * static_cast<double>(i));
    return ops::sum(ops::mul(t, Tensor(t.shape(), w)));
  };

  check("matmul", [&](auto& in) { return project(ops::matmul(in[0], in[1])); },
        {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})});
  check("add", [&](auto& in) { return project(ops::add(in[0], in[1])); },
        {random_tensor(rng, {2, 3, 4}), random_tensor(rng, {4})});
  check("sub", [&](auto& in) { return project(ops::sub(in[0], in[1])); },
        {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})});
  check("mul", [&](auto& in) { return project(ops::mul(in[0], in[1])); },
        {random_tensor(rng, {2, 3, 4}), random_tensor(rng, {3, 4})});
  check("scale", [&](auto& in) { return project(ops::scale(in[0], -1.7)); },
        {random_tensor(rng, {5})});
  check("add_scalar", [&](auto& in) { return project(ops::add_scalar(in[0], 0.3)); },
        {random_tensor(rng, {5})});
  check("concat", [&](auto& in) { return project(ops::concat({in[0], in[1]}, 1)); },
        {random_tensor(rng, {2, 3, 2}), random_tensor(rng, {2, 1, 2})});
  check("slice", [&](auto& in) { return project(ops::slice(in[0], 1, 1, 3)); },
        {random_tensor(rng, {2, 4, 3})});
  check("slice_rows", [&](auto& in) { return project(ops::slice_rows(in[0], 0, 2)); },
        {random_tensor(rng, {3, 2})});
  check("flatten", [&](auto& in) { return project(ops::flatten(in[0])); },
        {random_tensor(rng, {2, 3, 2})});
  check("reshape", [&](auto& in) { return project(ops::reshape(in[0], {6, 2})); },
        {random_tensor(rng, {2, 3, 2})});
  check("transpose", [&](auto& in) { return project(ops::transpose(in[0])); },
        {random_tensor(rng, {3, 2})});
  check("sum", [&](auto& in) { return ops::scale(ops::sum(in[0]), 1.3); },
        {random_tensor(rng, {4})});
  check("mean", [&](auto& in) { return ops::scale(ops::mean(in[0]), 1.3); },
        {random_tensor(rng, {4})});
  check("mean_axis", [&](auto& in) { return project(ops::mean_axis(in[0], 1)); },
        {random_tensor(rng, {2, 3, 4})});
  check("sigmoid", [&](auto& in) { return project(ops::sigmoid(in[0])); },
        {random_tensor(rng, {6}, -3, 3)});
  check("tanh", [&](auto& in) { return project(ops::tanh(in[0])); },
        {random_tensor(rng, {6}, -3, 3)});
  check("relu", [&](auto& in) { return project(ops::relu(in[0])); },
        {Tensor({4}, {-1.2, -0.3, 0.4, 2.0})});
  check("exp", [&](auto& in) { return project(ops::exp(in[0])); },
        {random_tensor(rng, {6})});
  check("log", [&](auto& in) { return project(ops::log(in[0])); },
        {random_tensor(rng, {6}, 0.5, 3.0)});
  check("abs", [&](auto& in) { return project(ops::abs(in[0])); },
        {Tensor({4}, {-1.2, -0.3, 0.4, 2.0})});
  check("square", [&](auto& in) { return project(ops::square(in[0])); },
        {random_tensor(rng, {6})});
  check("softmax_rows", [&](auto& in) { return project(ops::softmax_rows(in[0])); },
        {random_tensor(rng, {3, 4}, -2, 2)});
  check("log_softmax_rows", [&](auto& in) { return project(ops::log_softmax_rows(in[0])); },
        {random_tensor(rng, {3, 4}, -2, 2)});
  check("layer_norm_rows", [&](auto& in) { return project(ops::layer_norm_rows(in[0])); },
        {random_tensor(rng, {3, 5}, -2, 2)});
  check("conv1d causal",
        [&](auto& in) { return project(ops::conv1d(in[0], in[1], 2, true)); },
        {random_tensor(rng, {2, 6, 3}), random_tensor(rng, {3, 3, 2})});
  check("conv1d valid",
        [&](auto& in) { return project(ops::conv1d(in[0], in[1], 1, false)); },
        {random_tensor(rng, {7, 2}), random_tensor(rng, {3, 2, 3})});
}

TEST_CASE("random three-layer composition matches finite differences") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Tensor> in{random_tensor(rng, {4, 3}), random_tensor(rng, {3, 5}),
                           random_tensor(rng, {5, 4}), random_tensor(rng, {4, 2})};
    auto fn = [](const std::vector<Tensor>& t) {
      Tensor h1 = ops::tanh(ops::matmul(t[0], t[1]));
      Tensor h2 = ops::sigmoid(ops::matmul(h1, t[2]));
      Tensor h3 = ops::matmul(h2, t[3]);
      return ops::mean(ops::square(h3));
    };
    auto r = check_gradients(fn, in);
    INFO("max error " << r.max_error);
    CHECK(r.ok);
  }
}

TEST_CASE("forward and gradient are deterministic") {
  auto run = [] {
    std::mt19937_64 rng(1234);
    Tensor x = random_tensor(rng, {3, 8, 2}, -1, 1, true);
    Tensor w = random_tensor(rng, {3, 2, 4}, -1, 1, true);
    Tensor loss = ops::mean(ops::tanh(ops::conv1d(x, w, 2, true)));
    const double v = loss.item();
    backward(loss);
    std::vector<double> out{v};
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  CHECK(run() == run());
}
