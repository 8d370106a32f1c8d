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

#include "doctest.h"

#include <cmath>
#include <random>
#include <regex>
#include <set>

#include "test_data.hpp"
#include "test_util.hpp"
#include "tk/csv.hpp"
#include "tk/error.hpp"
#include "tk/interpreter.hpp"
#include "tk/ops.hpp"
#include "tk/render.hpp"

using namespace tk;
using namespace tk::interp;

namespace {

// F(x) = sum_ij w_ij x_ij for each window of the batch.
BatchScalar linear(const Matrix& w) {
  return [w](const Tensor& xb) {
    const std::size_t b = xb.dim(0), n = w.values().size();
    Tensor wt({n, 1}, {w.values().begin(), w.values().end()});
    return ops::reshape(ops::matmul(ops::reshape(xb, {b, n}), wt), {b});
  };
}

// Two-layer tanh network with fixed random weights.
BatchScalar smooth_mlp(std::mt19937_64& rng, std::size_t in, std::size_t hidden) {
  Tensor w1 = tk::testing::random_tensor(rng, {in, hidden});
  Tensor b1 = tk::testing::random_tensor(rng, {hidden});
  Tensor w2 = tk::testing::random_tensor(rng, {hidden, 1});
  return [=](const Tensor& xb) {
    const std::size_t b = xb.dim(0);
    Tensor h = ops::tanh(ops::add(ops::matmul(ops::reshape(xb, {b, in}), w1), b1));
    return ops::reshape(ops::matmul(h, w2), {b});
  };
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  return Matrix(r, c, tk::testing::random_values(rng, r * c));
}

}  // namespace

TEST_CASE("select_points order statistics") {
  const std::vector<double> losses{0.1, 0.3, 0.05};
  SelectionSpec s;
  s.mode = SelectionMode::Best;
  s.k = 1;
  CHECK(select_points(losses, s) == std::vector<std::size_t>{2});
  s.mode = SelectionMode::Worst;
  s.k = 2;
  CHECK(select_points(losses, s) == std::vector<std::size_t>{1, 0});
  s.k = 4;
  try {
    select_points(losses, s);
    FAIL("expected KTooLarge");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::KTooLarge);
  }

  const std::vector<double> tied{0.2, 0.1, 0.2, 0.1};
  s.mode = SelectionMode::Best;
  s.k = 3;
  CHECK(select_points(tied, s) == std::vector<std::size_t>{1, 3, 0});
  s.mode = SelectionMode::Worst;
  CHECK(select_points(tied, s) == std::vector<std::size_t>{0, 2, 1});

  std::vector<double> many(50, 0.0);
  s.mode = SelectionMode::Random;
  s.k = 7;
  s.seed = 4;
  const auto a = select_points(many, s);
  CHECK(a == select_points(many, s));
  std::set<std::size_t> distinct(a.begin(), a.end());
  CHECK(distinct.size() == 7);

  s.mode = SelectionMode::Explicit;
  s.indices = {3, 50};
  CHECK_THROWS_AS(select_points(many, s), Error);
}

TEST_CASE("linear worked examples") {
  const BatchScalar f = linear(Matrix(1, 2, {2.0, 3.0}));
  const Matrix x(1, 2, {1.0, 1.0});
  const Matrix zero(1, 2);
  for (std::size_t m : {1, 2, 7, 64}) {
    const auto a = integrated_gradients(f, x, zero, m);
    CHECK(a.scores(0, 0) == 2.0);
    CHECK(a.scores(0, 1) == 3.0);
  }
  const auto same = integrated_gradients(f, x, x, 16);
  CHECK(same.scores(0, 0) == 0.0);
  CHECK(same.scores(0, 1) == 0.0);

  const auto gxi = grad_x_input(f, x);
  CHECK(gxi.scores(0, 0) == 2.0);
  CHECK(gxi.scores(0, 1) == 3.0);
  const auto at_zero = grad_x_input(f, zero);
  CHECK(at_zero.scores(0, 0) == 0.0);
  CHECK(at_zero.scores(0, 1) == 0.0);

  const auto occ = occlusion(f, x, zero);
  CHECK(occ.scores(0, 1) == 3.0);
  const auto self = occlusion(f, x, x);
  CHECK(self.scores(0, 0) == 0.0);
  CHECK(self.scores(0, 1) == 0.0);
}

TEST_CASE("attribution properties on random linear models") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix w = random_matrix(rng, 4, 3);
    const Matrix x = random_matrix(rng, 4, 3);
    const Matrix base = random_matrix(rng, 4, 3);
    const BatchScalar f = linear(w);
    const auto ig = integrated_gradients(f, x, base, 1);
    const auto ig0 = integrated_gradients(f, x, Matrix(4, 3), 1);
    const auto gxi = grad_x_input(f, x);
    const auto occ = occlusion(f, x, Matrix(4, 3));
    for (std::size_t i = 0; i < 12; ++i) {
      const double expected = w.values()[i] * (x.values()[i] - base.values()[i]);
      CHECK(std::abs(ig.scores.values()[i] - expected) <= 1e-9);
      CHECK(std::abs(gxi.scores.values()[i] - ig0.scores.values()[i]) <= 1e-9);
      CHECK(std::abs(occ.scores.values()[i] - ig0.scores.values()[i]) <= 1e-9);
    }
  }
}

TEST_CASE("occlusion patches share their difference") {
  const BatchScalar f = linear(Matrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
  const auto a = occlusion(f, Matrix(2, 2, 1.0), Matrix(2, 2), Patch{2, 1});
  CHECK(a.scores(0, 0) == 4.0);
  CHECK(a.scores(1, 0) == 4.0);
  CHECK(a.scores(0, 1) == 6.0);
  CHECK(a.scores(1, 1) == 6.0);
}

TEST_CASE("integrated gradients completeness on smooth networks") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const BatchScalar f = smooth_mlp(rng, 6, 8);
    const Matrix x = random_matrix(rng, 3, 2);
    const Matrix base = random_matrix(rng, 3, 2);
    const auto a = integrated_gradients(f, x, base, 256);
    const double delta = std::abs(a.output - a.baseline_output);
    CHECK(a.gap <= 1e-3 * delta + 1e-6);
    const auto reference = integrated_gradients(f, x, base, 16384);
    CHECK(reference.gap <= a.gap + 1e-12);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(std::abs(a.scores.values()[i] - reference.scores.values()[i]) <= 1e-3 * delta + 1e-6);
    }
  }
}

TEST_CASE("symmetric duplicated inputs receive equal attributions") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const double wa = std::uniform_real_distribution<double>(-2, 2)(rng);
    const double wb = std::uniform_real_distribution<double>(-2, 2)(rng);
    BatchScalar f = [wa, wb](const Tensor& xb) {
      const std::size_t b = xb.dim(0);
      Tensor w({3, 1}, {wa, wa, wb});
      return ops::reshape(ops::tanh(ops::matmul(ops::reshape(xb, {b, 3}), w)), {b});
    };
    const double v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const Matrix x(1, 3, {v, v, 0.3});
    const auto a = integrated_gradients(f, x, Matrix(1, 3), 64);
    CHECK(std::abs(a.scores(0, 0) - a.scores(0, 1)) <= 1e-9);
  }
}

TEST_CASE("tcn attributions on future cells are exactly zero") {
  std::mt19937_64 rng(3);
  arch::ConvNet net({"tcn", {{"channels", 4}, {"blocks", 2}, {"kernel_size", 3}}},
                    arch::TaskShape{8, 2, 1, 1, false}, 4, true);
  for (std::size_t pos = 0; pos < 8; ++pos) {
    BatchScalar f = [&net, pos](const Tensor& xb) {
      const Tensor h = net.block_outputs(xb).back();
      const std::size_t b = xb.dim(0), ch = h.dim(2);
      Tensor at = ops::reshape(ops::slice(h, 1, pos, pos + 1), {b, ch});
      return ops::reshape(ops::slice(at, 1, 0, 1), {b});
    };
    const Matrix x = random_matrix(rng, 8, 2);
    for (const auto& a : {integrated_gradients(f, x, random_matrix(rng, 8, 2), 32), grad_x_input(f, x)}) {
      for (std::size_t r = pos + 1; r < 8; ++r) {
        CHECK(a.scores(r, 0) == 0.0);
        CHECK(a.scores(r, 1) == 0.0);
      }
    }
  }
}

TEST_CASE("importance aggregation") {
  const std::vector<Matrix> two{Matrix(1, 1, 1.0), Matrix(1, 1, -3.0)};
  CHECK(aggregate_importance(two).mean_abs(0, 0) == 2.0);
  const std::vector<Matrix> one{Matrix(2, 2, {-1.0, 2.0, 0.5, -4.0})};
  CHECK(aggregate_importance(one).mean_abs == Matrix(2, 2, {1.0, 2.0, 0.5, 4.0}));
  const std::vector<Matrix> diag{Matrix(2, 2, {2.0, 0.0, 0.0, 2.0})};
  const auto imp = aggregate_importance(diag);
  CHECK(imp.per_component == std::vector<double>{1.0, 1.0});
  CHECK(imp.per_delay == std::vector<double>{1.0, 1.0});
  try {
    aggregate_importance({});
    FAIL("expected EmptyResults");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyResults);
  }
  const std::vector<Matrix> mixed{Matrix(1, 2), Matrix(2, 1)};
  CHECK_THROWS_AS(aggregate_importance(mixed), Error);
}

TEST_CASE("heatmap rendering") {
  const Matrix m(3, 2, {0.5, -1.0, 0.0, 2.0, -0.25, 1.0});
  const std::vector<std::string> rows{"t-2", "t-1", "t"}, cols{"x", "y"};
  const std::string svg = render::heatmap_svg(m, rows, cols, render::ColorScale::Diverging, "A");
  const std::regex cell("class=\"cell\"");
  CHECK(std::distance(std::sregex_iterator(svg.begin(), svg.end(), cell), std::sregex_iterator()) == 6);
  for (const auto& l : {"t-2", "t-1", ">t<", ">x<", ">y<"}) CHECK(svg.find(l) != std::string::npos);
  CHECK(svg == render::heatmap_svg(m, rows, cols, render::ColorScale::Diverging, "A"));

  const std::string csv = matrix_to_csv(m, cols, rows);
  const Matrix back = matrix_from_csv(csv, true);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(back.values()[i] - m.values()[i]) <= 1e-12);

  const std::string chart = render::line_chart_svg(
      {{"train", {1, 2, 3}, {3, 2, 1}}, {"val", {1, 2, 3}, {3, 2.5, 2}}}, "curves", "epoch", "loss");
  const std::regex series("class=\"series\"");
  CHECK(std::distance(std::sregex_iterator(chart.begin(), chart.end(), series), std::sregex_iterator()) == 2);
}

TEST_CASE("request round trip and end-to-end interpretation") {
  const nlohmann::json j = {{"method", "integrated_gradients"},
                            {"target", {{"row", 0}, {"col", 0}}},
                            {"baseline", "zero"},
                            {"ig_steps", 32},
                            {"selection", {{"mode", "worst"}, {"k", 4}, {"split", "eval"}, {"seed", 1}}}};
  const AttributionRequest req = request_from_json(j);
  CHECK(request_to_json(request_from_json(request_to_json(req))) == request_to_json(req));
  CHECK_THROWS_AS(request_from_json({{"method", "deeplift"}}), Error);
  CHECK_THROWS_AS(request_from_json({{"ig_steps", 0}}), Error);

  std::mt19937_64 rng(2);
  std::vector<double> x(200);
  for (double& v : x) v = std::normal_distribution<double>()(rng);
  auto ds = tk::testing::make_series({200}, {"x", "y"}, [&](std::size_t r, std::size_t c) {
    return c == 0 ? x[r] : (r >= 1 ? 0.9 * x[r - 1] : 0.0);
  });
  auto data = trainer::prepare(ds, tk::testing::simple_task(-3, 0, {"x"}, {"y"}), {});
  auto model = arch::build_model({"mlp", {{"widths", {8}}, {"activation", "tanh"}}}, data.task, 1);
  trainer::TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.lr = 0.01;
  trainer::train(*model, data, cfg);

  const Interpretation out = interpret(*model, data, req);
  REQUIRE(out.points.size() == 4);
  for (std::size_t i = 1; i < 4; ++i) CHECK(out.points[i - 1].loss >= out.points[i].loss);
  CHECK(out.importance.mean_abs.rows() == 4);
  CHECK(out.importance.per_delay.size() == 4);
  // delay -1 drives the target
  const auto& pd = out.importance.per_delay;
  CHECK(std::max_element(pd.begin(), pd.end()) - pd.begin() == 2);

  const Interpretation again = interpret(*model, data, req);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again.points[i].attribution.scores == out.points[i].attribution.scores);

  AttributionRequest no_target = req;
  no_target.target.reset();
  CHECK_THROWS_AS(interpret(*model, data, no_target), Error);
  AttributionRequest too_many = req;
  too_many.selection.k = 1000;
  CHECK_THROWS_AS(interpret(*model, data, too_many), Error);
}
