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

#include "hyperparams.hpp"
#include "tk/ops.hpp"

namespace tk::arch {

namespace {

Tensor step_slice(const Tensor& seq, std::size_t t) {
  const std::size_t batch = seq.dim(0), width = seq.dim(2);
  return ops::reshape(ops::slice(seq, 1, t, t + 1), {batch, width});
}

}  // namespace

Lstm::Lstm(const ArchSpec& spec, const TaskShape& shape, std::uint64_t seed, bool v2)
    : Model(spec, shape, seed), v2_(v2) {
  std::vector<std::string> keys = {"hidden_size", "layers"};
  if (v2_) keys.insert(keys.end(), {"stateful", "layer_norm", "residual"});
  detail::HyperparamReader hp(spec, keys);
  hidden_ = hp.positive("hidden_size", 32);
  const std::size_t n_layers = hp.positive("layers", 1);
  if (v2_) {
    stateful_ = hp.get<bool>("stateful", false);
    layer_norm_ = hp.get<bool>("layer_norm", true);
    residual_ = hp.get<bool>("residual", true);
  }

  const std::size_t h4 = 4 * hidden_;
  auto& params = parameters();
  std::size_t in = shape.in_width;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::string prefix = "lstm" + std::to_string(l);
    Layer layer;
    layer.in_width = in;
    layer.wx = params.size();
    add_weight(prefix + ".wx", {in, h4}, in, 1.0);
    layer.wh = params.size();
    add_weight(prefix + ".wh", {hidden_, h4}, hidden_, 1.0);
    if (layer_norm_) {
      layer.gain = params.size();
      add_constant(prefix + ".ln_gain", {h4}, 1.0);
    }
    layer.bias = params.size();
    Tensor& bias = add_constant(prefix + ".bias", {h4}, 0.0);
    auto values = bias.mutable_values();
    for (std::size_t j = hidden_; j < 2 * hidden_; ++j) values[j] = 1.0;
    if (residual_ && in != hidden_) {
      layer.has_proj = true;
      layer.proj = params.size();
      add_weight(prefix + ".proj", {in, hidden_}, in, 1.0);
    }
    layers_.push_back(layer);
    in = hidden_;
  }
  head_w_ = params.size();
  add_weight("head.weight", {hidden_, shape.out_size()}, hidden_, 1.0);
  head_b_ = params.size();
  add_constant("head.bias", {shape.out_size()}, 0.0);
}

void Lstm::reset_state() {
  if (!stateful_) Model::reset_state();
  state_ = RecurrentState{};
}

void Lstm::detach_state() {
  if (!stateful_) Model::detach_state();
  for (auto& t : state_.h) t = t.detach();
  for (auto& t : state_.c) t = t.detach();
}

Tensor Lstm::forward(const Tensor& x) {
  check_input(x, false);
  const std::size_t batch = x.dim(0), len = x.dim(1);
  if (len == 0) fail(ErrorKind::ShapeMismatch, "lstm: empty sequence");
  if (stateful_ && !state_.empty() && state_.batch() != batch) {
    fail(ErrorKind::StateShapeMismatch,
         "lstm: carried state has batch " + std::to_string(state_.batch()) + " but input has " +
             std::to_string(batch) + "; call reset_state first");
  }
  const bool carry = stateful_ && !state_.empty();
  auto& p = parameters();
  const std::size_t h4 = 4 * hidden_;

  RecurrentState final_state;
  Tensor seq = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Tensor pre = ops::matmul(ops::reshape(seq, {batch * len, layer.in_width}), p[layer.wx].value);
    if (!layer_norm_) pre = ops::add(pre, p[layer.bias].value);
    pre = ops::reshape(pre, {batch, len, h4});

    Tensor h = carry ? state_.h[l] : Tensor::zeros({batch, hidden_});
    Tensor c = carry ? state_.c[l] : Tensor::zeros({batch, hidden_});
    std::vector<Tensor> outputs;
    outputs.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
      Tensor z = ops::add(step_slice(pre, t), ops::matmul(h, p[layer.wh].value));
      if (layer_norm_) {
        z = ops::add(ops::mul(ops::layer_norm_rows(z), p[layer.gain].value), p[layer.bias].value);
      }
      Tensor i = ops::sigmoid(ops::slice(z, 1, 0, hidden_));
      Tensor f = ops::sigmoid(ops::slice(z, 1, hidden_, 2 * hidden_));
      Tensor g = ops::tanh(ops::slice(z, 1, 2 * hidden_, 3 * hidden_));
      Tensor o = ops::sigmoid(ops::slice(z, 1, 3 * hidden_, h4));
      c = ops::add(ops::mul(f, c), ops::mul(i, g));
      h = ops::mul(o, ops::tanh(c));
      Tensor out = h;
      if (residual_) {
        Tensor skip = step_slice(seq, t);
        if (layer.has_proj) skip = ops::matmul(skip, p[layer.proj].value);
        out = ops::add(out, skip);
      }
      outputs.push_back(ops::reshape(out, {batch, 1, hidden_}));
    }
    final_state.h.push_back(h);
    final_state.c.push_back(c);
    seq = ops::concat(outputs, 1);
  }

  last_ = final_state;
  if (stateful_) state_ = final_state;
  Tensor last = step_slice(seq, len - 1);
  return reshape_output(ops::add(ops::matmul(last, p[head_w_].value), p[head_b_].value));
}

}  // namespace tk::arch
