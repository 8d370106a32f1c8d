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

ConvNet::ConvNet(const ArchSpec& spec, const TaskShape& shape, std::uint64_t seed, bool causal)
    : Model(spec, shape, seed), causal_(causal) {
  detail::HyperparamReader hp(spec, {"blocks", "channels", "kernel_size", "dilations",
                                     "dilation_base", "convs_per_block", "dropout"});
  const std::size_t n_blocks = hp.positive("blocks", 2);
  std::vector<std::size_t> channels = hp.sizes("channels", {32});
  if (channels.size() == 1) channels.assign(n_blocks, channels.front());
  if (channels.size() != n_blocks) hp.bad("channels must hold one entry per block");
  kernel_ = hp.positive("kernel_size", 3);
  convs_per_block_ = hp.positive("convs_per_block", 2);
  if (convs_per_block_ > 2) hp.bad("convs_per_block must be 1 or 2");
  dropout_ = hp.rate("dropout", 0.0);

  std::vector<std::size_t> dilations;
  if (hp.has("dilations")) {
    dilations = hp.sizes("dilations", {});
    if (dilations.size() != n_blocks) hp.bad("dilations must hold one entry per block");
  } else {
    const std::size_t base = hp.positive("dilation_base", causal ? 2 : 1);
    std::size_t d = 1;
    for (std::size_t i = 0; i < n_blocks; ++i, d *= base) dilations.push_back(d);
  }

  if (!causal_ && feature_length_for(shape.in_len, dilations) < 1) {
    hp.bad("valid convolutions consume the whole input window of length " +
           std::to_string(shape.in_len));
  }

  const double relu_gain = std::sqrt(2.0);
  std::size_t in = shape.in_width;
  auto& params = parameters();
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    const std::size_t ch = channels[b];
    Block block;
    block.dilation = static_cast<int>(dilations[b]);
    block.conv1 = params.size();
    add_weight(prefix + ".conv1.weight", {kernel_, in, ch}, kernel_ * in, relu_gain);
    block.bias1 = params.size();
    add_constant(prefix + ".conv1.bias", {ch}, 0.0);
    if (convs_per_block_ == 2) {
      block.conv2 = params.size();
      add_weight(prefix + ".conv2.weight", {kernel_, ch, ch}, kernel_ * ch, relu_gain);
      block.bias2 = params.size();
      add_constant(prefix + ".conv2.bias", {ch}, 0.0);
    }
    if (in != ch) {
      block.has_down = true;
      block.down = params.size();
      add_weight(prefix + ".down.weight", {1, in, ch}, in, 1.0);
      block.down_bias = params.size();
      add_constant(prefix + ".down.bias", {ch}, 0.0);
    }
    blocks_.push_back(block);
    in = ch;
  }
  head_w_ = params.size();
  add_weight("head.weight", {in, shape.out_size()}, in, 1.0);
  head_b_ = params.size();
  add_constant("head.bias", {shape.out_size()}, 0.0);

  if (causal_ && receptive_field() > shape.in_len) {
    warn("ReceptiveFieldWarning: receptive field " + std::to_string(receptive_field()) +
         " exceeds the input window length " + std::to_string(shape.in_len));
  }
}

std::size_t ConvNet::feature_length_for(std::size_t len, const std::vector<std::size_t>& dilations) const {
  long remaining = static_cast<long>(len);
  for (std::size_t d : dilations) {
    remaining -= static_cast<long>(convs_per_block_ * (kernel_ - 1) * d);
  }
  return remaining < 1 ? 0 : static_cast<std::size_t>(remaining);
}

std::size_t ConvNet::receptive_field() const {
  std::size_t rf = 1;
  for (const Block& b : blocks_) rf += convs_per_block_ * (kernel_ - 1) * static_cast<std::size_t>(b.dilation);
  return rf;
}

std::size_t ConvNet::feature_length() const {
  if (causal_) return shape().in_len;
  std::vector<std::size_t> d;
  for (const Block& b : blocks_) d.push_back(static_cast<std::size_t>(b.dilation));
  return feature_length_for(shape().in_len, d);
}

Tensor ConvNet::run_block(const Block& block, const Tensor& x) {
  auto& p = parameters();
  Tensor h = ops::add(ops::conv1d(x, p[block.conv1].value, block.dilation, causal_), p[block.bias1].value);
  h = dropout(ops::relu(h), dropout_);
  if (convs_per_block_ == 2) {
    h = ops::add(ops::conv1d(h, p[block.conv2].value, block.dilation, causal_), p[block.bias2].value);
    h = dropout(ops::relu(h), dropout_);
  }
  Tensor skip = x;
  if (block.has_down) {
    skip = ops::add(ops::conv1d(x, p[block.down].value, 1, true), p[block.down_bias].value);
  }
  const std::size_t len = h.dim(1);
  if (skip.dim(1) != len) skip = ops::slice(skip, 1, skip.dim(1) - len, skip.dim(1));
  return ops::relu(ops::add(h, skip));
}

std::vector<Tensor> ConvNet::block_outputs(const Tensor& x) {
  check_input(x);
  std::vector<Tensor> out;
  Tensor h = x;
  for (const Block& b : blocks_) {
    h = run_block(b, h);
    out.push_back(h);
  }
  return out;
}

Tensor ConvNet::forward(const Tensor& x) {
  check_input(x);
  Tensor h = x;
  for (const Block& b : blocks_) h = run_block(b, h);
  const std::size_t batch = h.dim(0), len = h.dim(1), ch = h.dim(2);
  Tensor features = causal_ ? ops::reshape(ops::slice(h, 1, len - 1, len), {batch, ch})
                            : ops::mean_axis(h, 1);
  auto& p = parameters();
  return reshape_output(ops::add(ops::matmul(features, p[head_w_].value), p[head_b_].value));
}

}  // namespace tk::arch
