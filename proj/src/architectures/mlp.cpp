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

Mlp::Mlp(const ArchSpec& spec, const TaskShape& shape, std::uint64_t seed)
    : Model(spec, shape, seed) {
  detail::HyperparamReader hp(spec, {"widths", "activation", "dropout"});
  widths_ = hp.sizes("widths", {64});
  activation_ = hp.get<std::string>("activation", "relu");
  if (activation_ != "relu" && activation_ != "tanh" && activation_ != "identity") {
    hp.bad("activation must be relu, tanh or identity");
  }
  dropout_ = hp.rate("dropout", 0.0);

  const double gain = activation_ == "relu" ? std::sqrt(2.0) : 1.0;
  std::size_t in = shape.in_len * shape.in_width;
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    const std::string prefix = "fc" + std::to_string(i);
    add_weight(prefix + ".weight", {in, widths_[i]}, in, i == 0 ? 1.0 : gain);
    add_constant(prefix + ".bias", {widths_[i]}, 0.0);
    in = widths_[i];
  }
  add_weight("head.weight", {in, shape.out_size()}, in, widths_.empty() ? 1.0 : gain);
  add_constant("head.bias", {shape.out_size()}, 0.0);
}

Tensor Mlp::forward(const Tensor& x) {
  check_input(x);
  Tensor h = ops::flatten(x);
  auto& p = parameters();
  std::size_t k = 0;
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    h = ops::add(ops::matmul(h, p[k].value), p[k + 1].value);
    k += 2;
    if (activation_ == "relu") {
      h = ops::relu(h);
    } else if (activation_ == "tanh") {
      h = ops::tanh(h);
    }
    h = dropout(h, dropout_);
  }
  h = ops::add(ops::matmul(h, p[k].value), p[k + 1].value);
  return reshape_output(h);
}

}  // namespace tk::arch
