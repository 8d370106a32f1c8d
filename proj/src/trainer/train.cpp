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
#include <limits>

#include "tk/error.hpp"
#include "tk/ops.hpp"
#include "tk/trainer.hpp"

namespace tk::trainer {

using namespace tk::timebase;
using arch::Model;

namespace {

Tensor stack(const std::vector<const Matrix*>& rows) {
  const std::size_t r = rows.front()->rows(), c = rows.front()->cols();
  std::vector<double> values;
  values.reserve(rows.size() * r * c);
  for (const Matrix* m : rows) values.insert(values.end(), m->values().begin(), m->values().end());
  return Tensor({rows.size(), r, c}, std::move(values));
}

Tensor batch_loss(const Tensor& pred, const Tensor& target, LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return ops::mean(ops::square(ops::sub(pred, target)));
    case LossKind::Mae: return ops::mean(ops::abs(ops::sub(pred, target)));
    case LossKind::CrossEntropy: {
      const std::size_t b = pred.dim(0), k = pred.dim(2);
      Tensor logp = ops::log_softmax_rows(ops::reshape(pred, {b, k}));
      Tensor picked = ops::sum(ops::mul(logp, ops::reshape(target, {b, k})));
      return ops::scale(picked, -1.0 / static_cast<double>(b));
    }
  }
  return {};
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= z;
  return p;
}

// Loss of one point in scaled space; averaging these reproduces batch_loss.
double point_loss(const Matrix& pred, const Matrix& target, LossKind kind) {
  double acc = 0.0;
  const auto p = pred.values(), t = target.values();
  switch (kind) {
    case LossKind::Mse:
      for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
      return acc / static_cast<double>(p.size());
    case LossKind::Mae:
      for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
      return acc / static_cast<double>(p.size());
    case LossKind::CrossEntropy: {
      const double mx = *std::max_element(p.begin(), p.end());
      double z = 0.0;
      for (double v : p) z += std::exp(v - mx);
      const double lse = mx + std::log(z);
      for (std::size_t i = 0; i < p.size(); ++i) acc -= t[i] * (p[i] - lse);
      return acc;
    }
  }
  return 0.0;
}

class Optimizer {
 public:
  Optimizer(std::vector<Tensor> params, const TrainConfig& config)
      : params_(std::move(params)), config_(config) {
    for (const Tensor& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto values = params_[k].mutable_values();
      const auto grad = params_[k].grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grad[i] + config_.weight_decay * values[i];
        if (config_.optimizer == OptimizerKind::Adam) {
          m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
          v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
          values[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
        } else {
          m[i] = config_.momentum * m[i] + g;
          values[i] -= config_.lr * m[i];
        }
      }
    }
  }

  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  const TrainConfig& config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct TrainingMode {
  TrainingMode(Model& m, bool on) : model(m), saved(m.training()) { m.set_training(on); }
  ~TrainingMode() { model.set_training(saved); }
  Model& model;
  bool saved;
};

std::vector<std::string> component_names(const PreparedData& data) { return data.task.out_components; }

}  // namespace

std::vector<Matrix> forward_windows(Model& model, const std::vector<Sample>& samples,
                                    std::size_t batch_size) {
  if (batch_size == 0) batch_size = 1;
  TrainingMode mode(model, false);
  NoGradGuard no_grad;
  std::vector<Matrix> out;
  out.reserve(samples.size());
  const bool stateful = model.stateful();
  if (stateful) model.reset_state();
  std::size_t prev_slice = std::numeric_limits<std::size_t>::max(), prev_size = 0;
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t end = std::min(samples.size(), i + batch_size);
    if (stateful) {
      std::size_t e = i;
      while (e < end && samples[e].window.point.slice == samples[i].window.point.slice) ++e;
      end = e;
      if (samples[i].window.point.slice != prev_slice || end - i != prev_size) model.reset_state();
      prev_slice = samples[i].window.point.slice;
      prev_size = end - i;
    }
    std::vector<const Matrix*> xs;
    for (std::size_t k = i; k < end; ++k) xs.push_back(&samples[k].window.x);
    const Tensor y = model.forward(stack(xs));
    const std::size_t r = y.dim(1), c = y.dim(2);
    for (std::size_t k = 0; k < end - i; ++k) {
      Matrix m(r, c);
      std::copy_n(y.values().begin() + static_cast<std::ptrdiff_t>(k * r * c), r * c, m.values().begin());
      out.push_back(std::move(m));
    }
    i = end;
  }
  if (stateful) model.reset_state();
  return out;
}

double split_loss(Model& model, const PreparedData& data, Split split, const TrainConfig& config) {
  const auto& samples = data.of(split);
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto preds = forward_windows(model, samples, config.batch_size);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    total += point_loss(preds[i], samples[i].window.y, config.loss);
  }
  return total / static_cast<double>(preds.size());
}

Checkpoint train(Model& model, const PreparedData& data, const TrainConfig& config,
                 const TrainHooks& hooks) {
  config.validate(data.task.kind);
  if (config.stateful != model.stateful()) {
    fail(ErrorKind::ConfigError, config.stateful
                                     ? "stateful training needs a stateful architecture"
                                     : "a stateful architecture needs stateful=true training");
  }
  const auto& train_samples = data.of(Split::Train);
  if (train_samples.empty()) fail(ErrorKind::EmptyTrainSplit, "the train split holds no points");
  const Split select_split = data.of(Split::Val).empty() ? Split::Train : Split::Val;

  Checkpoint ckpt;
  ckpt.arch = model.spec();
  ckpt.shape = model.shape();
  ckpt.model_seed = model.seed();
  for (const auto& p : model.parameters()) {
    ckpt.param_names.push_back(p.name);
    ckpt.param_shapes.push_back(p.value.shape());
  }
  ckpt.task = data.task;
  ckpt.data_config = data.data_config;
  ckpt.scaler = data.scaler;
  ckpt.dataset_name = data.dataset->name;
  ckpt.dataset_digest = data.dataset_digest;
  ckpt.scaler_digest = data.scaler_digest;
  ckpt.split_digest = data.split_digest;
  ckpt.config = config;

  Optimizer opt(model.parameter_tensors(), config);
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  ckpt.params = model.snapshot();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches = make_batches(data.points(Split::Train), config.batch_size, config.stateful,
                                      config.shuffle, config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    {
      TrainingMode mode(model, true);
      if (config.stateful) model.reset_state();
      bool live = false;
      std::size_t live_size = 0;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        const Batch& batch = batches[b];
        if (config.stateful && (batch.reset || batch.indices.size() != live_size)) {
          model.reset_state();
          live = false;
        }
        std::vector<const Matrix*> xs, ys;
        for (std::size_t i : batch.indices) {
          xs.push_back(&train_samples[i].window.x);
          ys.push_back(&train_samples[i].window.y);
        }
        Tensor loss = batch_loss(model.forward(stack(xs)), stack(ys), config.loss);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          fail(ErrorKind::NonFiniteLoss, "loss became " + std::to_string(value) + " at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(b + 1) + " (try a smaller lr)");
        }
        opt.zero_grad();
        backward(loss, opt.params());
        opt.step();
        if (hooks.on_batch) {
          BatchEvent ev;
          ev.epoch = epoch;
          ev.batch = b;
          ev.reset = !live;
          ev.carried = live;
          for (std::size_t i : batch.indices) ev.points.push_back(train_samples[i].window.point);
          ev.loss = value;
          hooks.on_batch(ev);
        }
        if (config.stateful) {
          model.detach_state();
          live = true;
          live_size = batch.indices.size();
        }
        loss_sum += value * static_cast<double>(batch.indices.size());
        seen += batch.indices.size();
      }
      if (config.stateful) model.reset_state();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.val_loss = split_loss(model, data, select_split, config);
    if (!std::isfinite(rec.val_loss)) {
      fail(ErrorKind::NonFiniteLoss, "validation loss became " + std::to_string(rec.val_loss) +
                                         " at epoch " + std::to_string(epoch));
    }
    if (!data.of(Split::Val).empty()) {
      const EvalResult ev = evaluate(model, data, Split::Val, config);
      if (data.task.kind == TaskKind::Regression) {
        rec.metrics["val_mse"] = ev.mse;
        rec.metrics["val_mae"] = ev.mae;
      } else {
        rec.metrics["val_accuracy"] = ev.accuracy;
        rec.metrics["val_macro_f1"] = ev.macro_f1;
      }
    }
    ckpt.curves.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (rec.val_loss < best) {
      best = rec.val_loss;
      ckpt.best_epoch = epoch;
      ckpt.best_val = rec.val_loss;
      ckpt.params = model.snapshot();
      since_best = 0;
    } else if (++since_best > config.patience) {
      break;
    }
  }
  if (hooks.keep_last) ckpt.last_params = model.snapshot();
  model.load(ckpt.params);
  return ckpt;
}

EvalResult regression_metrics(const std::vector<Matrix>& predictions,
                              const std::vector<Matrix>& targets,
                              const std::vector<std::string>& component_names) {
  if (predictions.empty()) fail(ErrorKind::EmptyResults, "no points to evaluate");
  if (predictions.size() != targets.size()) {
    fail(ErrorKind::ShapeMismatch, "prediction and target counts differ");
  }
  EvalResult r;
  r.kind = TaskKind::Regression;
  r.n = predictions.size();
  const std::size_t nc = predictions.front().cols();
  std::vector<double> se(nc, 0.0), ae(nc, 0.0);
  std::size_t rows = 0;
  double total_se = 0.0, total_ae = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Matrix& p = predictions[i];
    const Matrix& t = targets[i];
    if (p.rows() != t.rows() || p.cols() != t.cols() || p.cols() != nc) {
      fail(ErrorKind::ShapeMismatch, "prediction and target shapes differ");
    }
    double point_se = 0.0;
    for (std::size_t a = 0; a < p.rows(); ++a) {
      for (std::size_t c = 0; c < nc; ++c) {
        const double d = p(a, c) - t(a, c);
        se[c] += d * d;
        ae[c] += std::abs(d);
        point_se += d * d;
      }
    }
    total_se += point_se;
    rows += p.rows();
    r.point_losses.push_back(point_se / static_cast<double>(p.rows() * nc));
  }
  for (double v : ae) total_ae += v;
  const double cells = static_cast<double>(rows * nc);
  r.mse = total_se / cells;
  r.mae = total_ae / cells;
  for (std::size_t c = 0; c < nc; ++c) {
    ComponentMetrics m;
    m.name = c < component_names.size() ? component_names[c] : "c" + std::to_string(c);
    m.mse = se[c] / static_cast<double>(rows);
    m.mae = ae[c] / static_cast<double>(rows);
    r.per_component.push_back(m);
  }
  r.predictions = predictions;
  r.targets = targets;
  return r;
}

EvalResult classification_metrics(const std::vector<Matrix>& probabilities,
                                  const std::vector<std::size_t>& labels, std::size_t n_classes) {
  if (probabilities.empty()) fail(ErrorKind::EmptyResults, "no points to evaluate");
  if (probabilities.size() != labels.size()) {
    fail(ErrorKind::ShapeMismatch, "probability and label counts differ");
  }
  EvalResult r;
  r.kind = TaskKind::Classification;
  r.n = probabilities.size();
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto p = probabilities[i].values();
    if (p.size() != n_classes || labels[i] >= n_classes) {
      fail(ErrorKind::ShapeMismatch, "probabilities do not match the class count");
    }
    const auto pred = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    ++r.confusion[labels[i]][pred];
    if (pred == labels[i]) ++correct;
    r.point_losses.push_back(-std::log(std::max(p[labels[i]], 1e-300)));
    Matrix onehot(1, n_classes);
    onehot(0, labels[i]) = 1.0;
    r.targets.push_back(std::move(onehot));
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  double f1_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < n_classes; ++k) {
    std::size_t tp = r.confusion[k][k], fp = 0, fn = 0;
    for (std::size_t j = 0; j < n_classes; ++j) {
      if (j == k) continue;
      fp += r.confusion[j][k];
      fn += r.confusion[k][j];
    }
    if (tp + fp + fn == 0) continue;
    ++present;
    f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  r.macro_f1 = present ? f1_sum / static_cast<double>(present) : 0.0;
  double nll = 0.0;
  for (double v : r.point_losses) nll += v;
  r.loss = nll / static_cast<double>(r.n);
  r.predictions = probabilities;
  return r;
}

namespace {

std::vector<Matrix> to_output_space(const std::vector<Matrix>& scaled, const PreparedData& data,
                                    std::vector<std::size_t>* labels) {
  std::vector<Matrix> out;
  out.reserve(scaled.size());
  if (data.task.kind == TaskKind::Classification) {
    for (const Matrix& m : scaled) {
      const auto p = softmax(m.values());
      Matrix prob(1, p.size());
      std::copy(p.begin(), p.end(), prob.values().begin());
      if (labels) {
        labels->push_back(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
      }
      out.push_back(std::move(prob));
    }
    return out;
  }
  const auto comps = data.out_component_indices();
  for (const Matrix& m : scaled) {
    out.push_back(data.scaler.scale_outputs ? invert_scaler(m, data.scaler, comps) : m);
  }
  return out;
}

}  // namespace

EvalResult evaluate(Model& model, const PreparedData& data, Split split, const TrainConfig& config) {
  const auto& samples = data.of(split);
  if (samples.empty()) {
    fail(ErrorKind::EmptyResults, "the " + std::string(split_name(split)) + " split holds no points");
  }
  const auto scaled = forward_windows(model, samples, config.batch_size);
  const auto outputs = to_output_space(scaled, data, nullptr);
  EvalResult r;
  if (data.task.kind == TaskKind::Regression) {
    std::vector<Matrix> targets;
    for (const Sample& s : samples) targets.push_back(s.raw_y);
    r = regression_metrics(outputs, targets, component_names(data));
  } else {
    std::vector<std::size_t> labels;
    for (const Sample& s : samples) labels.push_back(*s.window.label);
    r = classification_metrics(outputs, labels, data.task.n_classes);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    total += point_loss(scaled[i], samples[i].window.y, config.loss);
  }
  r.loss = total / static_cast<double>(scaled.size());
  r.split = split;
  for (const Sample& s : samples) r.points.push_back(s.window.point);
  return r;
}

EvalResult evaluate(const Checkpoint& checkpoint, const PreparedData& data, Split split) {
  auto model = checkpoint.restore();
  return evaluate(*model, data, split, checkpoint.config);
}

Predictions predict(Model& model, const PreparedData& data, std::span<const PredictionPoint> points,
                    std::size_t batch_size) {
  std::vector<Sample> samples;
  samples.reserve(points.size());
  for (const PredictionPoint& p : points) {
    Sample s;
    s.window = build_window_pair(*data.dataset, p, data.task, &data.scaler);
    samples.push_back(std::move(s));
  }
  Predictions out;
  out.points.assign(points.begin(), points.end());
  if (samples.empty()) return out;
  const auto scaled = forward_windows(model, samples, batch_size);
  out.values = to_output_space(scaled, data, &out.labels);
  return out;
}

}  // namespace tk::trainer
