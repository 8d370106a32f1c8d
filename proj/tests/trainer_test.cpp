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
#include <filesystem>
#include <random>

#include "test_data.hpp"
#include "tk/error.hpp"
#include "tk/ops.hpp"
#include "tk/trainer.hpp"

using namespace tk;
using namespace tk::trainer;
using tk::testing::make_series;
using tk::testing::simple_task;
using timebase::PredictionPoint;

namespace {

class BiasOnly final : public arch::Model {
 public:
  BiasOnly(const arch::ArchSpec& spec, const arch::TaskShape& shape, std::uint64_t seed)
      : Model(spec, shape, seed) {
    add_constant("bias", {shape.out_size()}, 0.0);
  }
  Tensor forward(const Tensor& x) override {
    check_input(x);
    return reshape_output(ops::add(Tensor::zeros({x.dim(0), shape().out_size()}), parameters()[0].value));
  }
};

void ensure_bias_only() {
  if (!arch::is_registered("bias_only")) {
    arch::register_architecture("bias_only", [](const arch::ArchSpec& s, const arch::TaskShape& t,
                                                 std::uint64_t seed) {
      return std::make_unique<BiasOnly>(s, t, seed);
    });
  }
}

std::shared_ptr<timebase::TimeSeriesDataset> noisy_linear(std::size_t n, std::uint64_t seed,
                                                          std::vector<std::size_t> lengths = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = noise(rng);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = 0.8 * x[i] + (i > 0 ? -0.4 * x[i - 1] : 0.0) + 0.1 * noise(rng) + 10.0;
  }
  if (lengths.empty()) lengths = {n};
  return make_series(lengths, {"x", "y"}, [&](std::size_t r, std::size_t c) { return c == 0 ? x[r] : y[r]; });
}

std::vector<PredictionPoint> slice_points(std::vector<std::size_t> slices) {
  std::vector<PredictionPoint> out;
  for (std::size_t i = 0; i < slices.size(); ++i) out.push_back({slices[i], i, i});
  return out;
}

}  // namespace

TEST_CASE("stateful batches are chronological runs within a slice") {
  const auto one = slice_points({0, 0, 0, 0, 0, 0});
  auto b = make_batches(one, 2, true, false, 0);
  REQUIRE(b.size() == 3);
  CHECK(b[0].indices == std::vector<std::size_t>{0, 1});
  CHECK(b[1].indices == std::vector<std::size_t>{2, 3});
  CHECK(b[2].indices == std::vector<std::size_t>{4, 5});
  CHECK(b[0].reset);
  CHECK_FALSE(b[1].reset);

  const auto two = slice_points({0, 0, 0, 0, 1, 1, 1});
  b = make_batches(two, 2, true, false, 0);
  REQUIRE(b.size() == 4);
  CHECK(b[0].reset);
  CHECK_FALSE(b[1].reset);
  CHECK(b[2].reset);
  CHECK(b[2].indices == std::vector<std::size_t>{4, 5});
  CHECK(b[3].indices == std::vector<std::size_t>{6});
}

TEST_CASE("shuffled batches are a seeded permutation") {
  const auto pts = slice_points(std::vector<std::size_t>(23, 0));
  const auto a = make_batches(pts, 5, false, true, 7, 3);
  const auto b = make_batches(pts, 5, false, true, 7, 3);
  const auto c = make_batches(pts, 5, false, true, 7, 4);
  std::vector<std::size_t> flat_a, flat_c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].indices == b[i].indices);
    flat_a.insert(flat_a.end(), a[i].indices.begin(), a[i].indices.end());
  }
  for (const auto& batch : c) flat_c.insert(flat_c.end(), batch.indices.begin(), batch.indices.end());
  CHECK(a.size() == 5);
  CHECK(a.back().indices.size() == 3);
  CHECK(flat_a != flat_c);
  std::sort(flat_a.begin(), flat_a.end());
  for (std::size_t i = 0; i < flat_a.size(); ++i) CHECK(flat_a[i] == i);
}

TEST_CASE("config validation") {
  nlohmann::json j = {{"stateful", true}, {"shuffle", true}};
  CHECK_THROWS_AS(config_from_json(j, timebase::TaskKind::Regression), Error);
  TrainConfig c = config_from_json({{"stateful", true}}, timebase::TaskKind::Regression);
  CHECK_FALSE(c.shuffle);
  CHECK(config_from_json(nlohmann::json::object(), timebase::TaskKind::Classification).loss ==
        LossKind::CrossEntropy);
  CHECK_THROWS_AS(config_from_json({{"loss", "mse"}}, timebase::TaskKind::Classification), Error);
  CHECK_THROWS_AS(config_from_json({{"lr_rate", 1}}, timebase::TaskKind::Regression), Error);
  try {
    parse_split("vall");
    FAIL("expected UnknownSplit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownSplit);
    CHECK(std::string(e.what()).find("train, val, eval") != std::string::npos);
  }
}

TEST_CASE("bias-only model converges to the target mean") {
  ensure_bias_only();
  auto ds = make_series({60}, {"x", "y"}, [](std::size_t r, std::size_t c) {
    return c == 0 ? std::sin(0.3 * static_cast<double>(r)) : 3.0;
  });
  DataConfig dc;
  dc.scale_outputs = false;
  auto data = prepare(ds, simple_task(-1, 0, {"x"}, {"y"}), dc);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.lr = 0.1;
  cfg.batch_size = 8;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  auto model = arch::build_model({"bias_only", {}}, data.task, 0);
  const Checkpoint ck = train(*model, data, cfg);
  CHECK(model->parameters()[0].value.values()[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(ck.curves.back().train_loss < 1e-6);
  CHECK(ck.curves.size() <= 200);
}

TEST_CASE("early stopping with patience 0") {
  auto data = prepare(noisy_linear(300, 1), simple_task(-2, 0, {"x"}, {"y"}), {});
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.batch_size = 16;
  cfg.max_epochs = 60;
  cfg.patience = 0;
  auto model = arch::build_model({"mlp", {{"widths", {16}}}}, data.task, 3);
  const Checkpoint ck = train(*model, data, cfg);
  std::size_t first_bad = 0;
  double best = INFINITY;
  for (const auto& r : ck.curves) {
    if (r.val_loss >= best) {
      first_bad = r.epoch;
      break;
    }
    best = r.val_loss;
  }
  if (first_bad == 0) {
    CHECK(ck.curves.size() == cfg.max_epochs);
  } else {
    CHECK(ck.curves.size() == first_bad);
  }
  CHECK(first_bad != 0);
}

TEST_CASE("best epoch, restore and checkpoint round trip") {
  auto data = prepare(noisy_linear(400, 2), simple_task(-3, 0, {"x", "y"}, {"y"}), {});
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.batch_size = 32;
  cfg.max_epochs = 25;
  cfg.patience = 3;
  auto model = arch::build_model({"mlp", {{"widths", {8}}, {"dropout", 0.1}}}, data.task, 5);
  const Checkpoint ck = train(*model, data, cfg);
  double min_val = INFINITY;
  for (const auto& r : ck.curves) min_val = std::min(min_val, r.val_loss);
  CHECK(ck.best_val == min_val);
  CHECK(ck.curves[ck.best_epoch - 1].val_loss == min_val);

  auto restored = ck.restore();
  CHECK(std::abs(split_loss(*restored, data, Split::Val, ck.config) - ck.best_val) <= 1e-9);

  const auto dir = std::filesystem::temp_directory_path() / "tk_trainer_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(ck, dir.string());
  const Checkpoint loaded = load_checkpoint(dir.string());
  CHECK(loaded.params == ck.params);
  CHECK(loaded.curves.size() == ck.curves.size());
  CHECK(loaded.best_epoch == ck.best_epoch);
  CHECK(loaded.scaler_digest == data.scaler_digest);
  CHECK(std::abs(evaluate(loaded, data, Split::Val).loss - ck.best_val) <= 1e-9);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic") {
  auto data = prepare(noisy_linear(200, 4), simple_task(-2, 0, {"x"}, {"y"}), {});
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.batch_size = 10;
  cfg.seed = 99;
  auto run = [&] {
    auto m = arch::build_model({"mlp", {{"widths", {6}}, {"dropout", 0.2}}}, data.task, 8);
    return train(*m, data, cfg);
  };
  const Checkpoint a = run(), b = run();
  CHECK(curves_csv(a.curves) == curves_csv(b.curves));
  CHECK(a.params == b.params);
}

TEST_CASE("non-finite loss aborts") {
  auto data = prepare(noisy_linear(100, 5), simple_task(-1, 0, {"x"}, {"y"}), {});
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.lr = 1e8;
  cfg.max_epochs = 50;
  auto m = arch::build_model({"mlp", {{"widths", {4}}}}, data.task, 0);
  try {
    train(*m, data, cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
  }
}

TEST_CASE("metric examples") {
  std::vector<Matrix> targets = {Matrix(1, 1, 1.0), Matrix(1, 1, 3.0)};
  auto same = regression_metrics(targets, targets, {"y"});
  CHECK(same.mse == 0.0);
  auto constant = regression_metrics({Matrix(1, 1, 2.0), Matrix(1, 1, 2.0)}, targets, {"y"});
  CHECK(constant.mse == 1.0);
  CHECK(constant.mae == 1.0);
  double sum = 0.0;
  for (double v : constant.point_losses) sum += v;
  CHECK(sum / 2.0 == constant.mse);

  std::vector<Matrix> probs = {Matrix(1, 3, {0.7, 0.2, 0.1}), Matrix(1, 3, {0.1, 0.1, 0.8})};
  auto perfect = classification_metrics(probs, {0, 2}, 3);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.macro_f1 == 1.0);
  auto half = classification_metrics(probs, {0, 1}, 3);
  CHECK(half.accuracy == 0.5);
  CHECK(half.confusion[1][2] == 1);
  // class 0: F1 1; class 1: F1 0; class 2: F1 0
  CHECK(half.macro_f1 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("evaluate reports raw units") {
  auto ds = noisy_linear(300, 6);
  auto data = prepare(ds, simple_task(-2, 0, {"x"}, {"y"}), {});
  TrainConfig cfg;
  cfg.max_epochs = 3;
  auto m = arch::build_model({"mlp", {{"widths", {4}}}}, data.task, 1);
  train(*m, data, cfg);
  const EvalResult r = evaluate(*m, data, Split::Eval, cfg);
  CHECK(r.n == data.of(Split::Eval).size());
  CHECK(r.targets[0](0, 0) == ds->slices[0].values(r.points[0].offset, 1));
  double sum = 0.0;
  for (double v : r.point_losses) sum += v;
  CHECK(sum / static_cast<double>(r.n) == doctest::Approx(r.mse).epsilon(1e-12));
  CHECK(evaluate(*m, data, Split::Eval, cfg).to_json() == r.to_json());
}

TEST_CASE("predict inverts the scaler") {
  SUBCASE("identity model without scaling returns the input cell") {
    auto ds = noisy_linear(50, 7);
    DataConfig dc;
    dc.scale_inputs = false;
    dc.scale_outputs = false;
    auto data = prepare(ds, simple_task(-1, 0, {"x"}, {"y"}), dc);
    auto m = arch::build_model({"mlp", {{"widths", nlohmann::json::array()}}}, data.task, 0);
    auto w = m->parameters()[0].value.mutable_values();
    w[0] = 0.0;
    w[1] = 1.0;
    m->parameters()[1].value.mutable_values()[0] = 0.0;
    const auto p = predict(*m, data, data.split.eval);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      CHECK(p.values[i](0, 0) == ds->slices[0].values(p.points[i].offset, 0));
    }
  }
  SUBCASE("overfit linear model reproduces raw targets") {
    std::vector<double> x(120);
    std::mt19937_64 rng(3);
    for (double& v : x) v = std::normal_distribution<double>(0.0, 2.0)(rng);
    auto ds = make_series({120}, {"x", "y"}, [&](std::size_t r, std::size_t c) {
      return c == 0 ? x[r] : 2.0 * x[r] + 5.0;
    });
    auto data = prepare(ds, simple_task(0, 0, {"x"}, {"y"}), {});
    TrainConfig cfg;
    cfg.lr = 0.05;
    cfg.max_epochs = 300;
    cfg.patience = 300;
    cfg.batch_size = 16;
    auto m = arch::build_model({"mlp", {{"widths", nlohmann::json::array()}}}, data.task, 0);
    const Checkpoint ck = train(*m, data, cfg);
    REQUIRE(ck.curves.back().train_loss < 1e-8);
    const auto p = predict(*m, data, data.split.train);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      CHECK(p.values[i](0, 0) == doctest::Approx(data.of(Split::Train)[i].raw_y(0, 0)).epsilon(1e-4));
    }
  }
  SUBCASE("class probabilities sum to one") {
    auto ds = make_series({80}, {"x", "label"}, [](std::size_t r, std::size_t c) {
      return c == 0 ? std::cos(0.5 * static_cast<double>(r)) : static_cast<double>(r % 3);
    });
    auto task = simple_task(-2, 0, {"x"}, {"label"});
    task.kind = timebase::TaskKind::Classification;
    task.n_classes = 3;
    auto data = prepare(ds, task, {});
    auto m = arch::build_model({"mlp", {{"widths", {5}}}}, data.task, 2);
    const auto p = predict(*m, data, data.split.val);
    REQUIRE(!p.values.empty());
    for (const auto& v : p.values) {
      double s = 0.0;
      for (double q : v.values()) s += q;
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    CHECK(p.labels.size() == p.values.size());
    const timebase::PredictionPoint bad{0, 0, 0};
    CHECK_THROWS_AS(predict(*m, data, std::span(&bad, 1)), Error);
  }
}

TEST_CASE("stateful training never carries across slices") {
  auto ds = noisy_linear(160, 9, {50, 40, 70});
  DataConfig dc;
  dc.mode = timebase::SplitMode::BySlice;
  dc.fractions = {0.5, 0.5, 0.0};
  auto data = prepare(ds, simple_task(-3, 0, {"x"}, {"y"}), dc);
  TrainConfig cfg;
  cfg.stateful = true;
  cfg.shuffle = false;
  cfg.batch_size = 8;
  cfg.max_epochs = 2;
  auto m = arch::build_model({"lstmv2", {{"hidden_size", 4}, {"stateful", true}}}, data.task, 1);
  std::optional<std::size_t> prev_slice;
  std::size_t carried = 0, resets = 0;
  TrainHooks hooks;
  hooks.on_batch = [&](const BatchEvent& ev) {
    for (const auto& p : ev.points) CHECK(p.slice == ev.points.front().slice);
    if (ev.carried) {
      ++carried;
      REQUIRE(prev_slice);
      CHECK(*prev_slice == ev.points.front().slice);
    } else {
      ++resets;
    }
    prev_slice = ev.points.front().slice;
  };
  train(*m, data, cfg, hooks);
  CHECK(carried > 0);
  CHECK(resets >= 2);

  TrainConfig shuffled = cfg;
  shuffled.stateful = false;
  shuffled.shuffle = true;
  CHECK_THROWS_AS(train(*m, data, shuffled), Error);
}

TEST_CASE("sweep trains every grid cell and keeps the argmin") {
  auto data = prepare(noisy_linear(200, 10), simple_task(-2, 0, {"x"}, {"y"}), {});
  TrainConfig base;
  base.max_epochs = 4;
  base.batch_size = 16;
  SweepConfig sw;
  sw.grid = {{"arch.widths", {nlohmann::json::array({4}), nlohmann::json::array({8})}},
             {"train.lr", {0.001, 0.01}}};
  CHECK(trial_count(sw) == 4);
  CHECK(trial_assignment(sw, 1) == nlohmann::json{{"arch.widths", {4}}, {"train.lr", 0.01}});

  const SweepResult r = sweep(sw, {"mlp", {}}, base, data);
  REQUIRE(r.trials.size() == 4);
  REQUIRE(r.best);
  for (const auto& t : r.trials) {
    CHECK(t.status == "ok");
    CHECK(r.trials[*r.best].best_val <= t.best_val);
  }
  REQUIRE(r.consolidated);
  CHECK(r.consolidated->best_val == r.trials[*r.best].best_val);
  auto restored = r.consolidated->restore();
  CHECK(std::abs(split_loss(*restored, data, Split::Val, r.consolidated->config) -
                 r.consolidated->best_val) <= 1e-9);

  SweepConfig parallel = sw;
  parallel.workers = 3;
  parallel.consolidate = false;
  const SweepResult p = sweep(parallel, {"mlp", {}}, base, data);
  CHECK_FALSE(p.consolidated);
  for (std::size_t i = 0; i < 4; ++i) CHECK(p.trials[i].best_val == r.trials[i].best_val);
}

TEST_CASE("failed trials are recorded") {
  auto data = prepare(noisy_linear(100, 11), simple_task(-1, 0, {"x"}, {"y"}), {});
  TrainConfig base;
  base.max_epochs = 2;
  SweepConfig sw;
  sw.grid = {{"arch.activation", {"relu", "softsign", "tanh"}}};
  const SweepResult r = sweep(sw, {"mlp", {}}, base, data);
  REQUIRE(r.trials.size() == 3);
  CHECK(r.trials[1].status == "failed");
  CHECK(r.trials[1].error.find("activation") != std::string::npos);
  REQUIRE(r.best);
  CHECK(*r.best != 1);

  SweepConfig bad;
  bad.grid = {{"lr", {0.1}}};
  CHECK_THROWS_AS(sweep(bad, {"mlp", {}}, base, data), Error);
}
