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

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "tk/tensor.hpp"
#include "tk/timebase.hpp"

namespace tk::arch {

struct ArchSpec {
  std::string name;
  nlohmann::json hyperparams = nlohmann::json::object();
};

// Input/output window shapes a model is built for.
struct TaskShape {
  std::size_t in_len = 1;
  std::size_t in_width = 1;
  std::size_t out_len = 1;    // 1 for classification
  std::size_t out_width = 1;  // n_classes for classification
  bool classification = false;

  static TaskShape from_task(const timebase::TaskSpec& task);
  std::size_t out_size() const { return out_len * out_width; }
};

struct Parameter {
  std::string name;
  Tensor value;
};

// Uniform model contract: forward maps (B, in_len, in_width) to
// (B, out_len, out_width); classification heads emit logits of shape
// (B, 1, n_classes).
class Model {
 public:
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  virtual Tensor forward(const Tensor& x) = 0;

  const ArchSpec& spec() const { return spec_; }
  const TaskShape& shape() const { return shape_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Tensor> parameter_tensors() const;
  std::size_t parameter_count() const;

  // Copies of all parameter values, in declaration order.
  std::vector<std::vector<double>> snapshot() const;
  void load(const std::vector<std::vector<double>>& values);

  virtual bool stateful() const { return false; }
  // Zero the recurrent carry. Throws NotStateful for stateless models.
  virtual void reset_state();
  // Keep the carry values but cut their gradient history.
  virtual void detach_state();

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  const std::vector<std::string>& warnings() const { return warnings_; }

 protected:
  Model(ArchSpec spec, TaskShape shape, std::uint64_t seed);

  // Weight drawn from U(-b, b), b = gain * sqrt(3 / fan_in).
  Tensor& add_weight(const std::string& name, Shape shape, std::size_t fan_in, double gain);
  Tensor& add_constant(const std::string& name, Shape shape, double value);

  // Checks (B, in_len, in_width); recurrent models pass check_length=false.
  void check_input(const Tensor& x, bool check_length = true) const;
  Tensor dropout(const Tensor& x, double rate);
  Tensor reshape_output(const Tensor& flat) const;  // (B, out_size) -> (B, out_len, out_width)

  std::mt19937_64& rng() { return rng_; }
  void warn(std::string message) { warnings_.push_back(std::move(message)); }

 private:
  ArchSpec spec_;
  TaskShape shape_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  bool training_ = false;
  std::vector<Parameter> params_;
  std::vector<std::string> warnings_;
};

using Constructor =
    std::function<std::unique_ptr<Model>(const ArchSpec&, const TaskShape&, std::uint64_t)>;

// Errors: UnknownArchitecture, IncompatibleHyperparams.
std::unique_ptr<Model> build_model(const ArchSpec& spec, const TaskShape& shape, std::uint64_t seed);
std::unique_ptr<Model> build_model(const ArchSpec& spec, const timebase::TaskSpec& task,
                                   std::uint64_t seed);

// Adds `name` to the registry after running the conformance suite (shape,
// gradient and determinism checks). Errors: DuplicateName, ContractViolation.
void register_architecture(const std::string& name, Constructor constructor);
bool is_registered(const std::string& name);
std::vector<std::string> registered_architectures();

// Runs the conformance suite without registering. Throws ContractViolation
// naming the failing check.
void check_conformance(const std::string& name, const Constructor& constructor,
                       const nlohmann::json& hyperparams = nlohmann::json::object());

void reset_state(Model& model);
void detach_state(Model& model);

// ---------------------------------------------------------------------------
// Built-in architectures. Exposed so tests and tools can reach internals such
// as feature maps and recurrent state.

class Mlp final : public Model {
 public:
  Mlp(const ArchSpec& spec, const TaskShape& shape, std::uint64_t seed);
  Tensor forward(const Tensor& x) override;

 private:
  std::vector<std::size_t> widths_;
  std::string activation_;
  double dropout_ = 0.0;
};

// Shared topology of the TCN (causal, padded) and CNN (non-causal, valid).
class ConvNet final : public Model {
 public:
  ConvNet(const ArchSpec& spec, const TaskShape& shape, std::uint64_t seed, bool causal);
  Tensor forward(const Tensor& x) override;

  // Output of every residual block, each (B, L_i, channels_i).
  std::vector<Tensor> block_outputs(const Tensor& x);
  std::size_t receptive_field() const;
  std::size_t feature_length() const;  // time positions left after the last block
  bool causal() const { return causal_; }

 private:
  struct Block {
    std::size_t conv1 = 0, bias1 = 0, conv2 = 0, bias2 = 0;  // parameter indices
    std::size_t down = 0, down_bias = 0;
    bool has_down = false;
    int dilation = 1;
  };
  Tensor run_block(const Block& block, const Tensor& x);
  std::size_t feature_length_for(std::size_t len, const std::vector<std::size_t>& dilations) const;

  bool causal_;
  std::size_t kernel_ = 3;
  std::size_t convs_per_block_ = 2;
  double dropout_ = 0.0;
  std::vector<Block> blocks_;
  std::size_t head_w_ = 0, head_b_ = 0;
};

struct RecurrentState {
  std::vector<Tensor> h;  // per layer, (B, hidden)
  std::vector<Tensor> c;
  bool empty() const { return h.empty(); }
  std::size_t batch() const { return h.empty() ? 0 : h.front().dim(0); }
};

// LSTM over the window's time axis; the head reads the last hidden state.
// The v2 variant adds per-step layer normalization of the gate
// pre-activations, a residual connection around each layer, and an optional
// carried state. Recurrent models accept any sequence length.
class Lstm final : public Model {
 public:
  Lstm(const ArchSpec& spec, const TaskShape& shape, std::uint64_t seed, bool v2);
  Tensor forward(const Tensor& x) override;

  bool stateful() const override { return stateful_; }
  void reset_state() override;
  void detach_state() override;

  const RecurrentState& state() const { return state_; }
  std::size_t hidden_size() const { return hidden_; }
  // Final (h, c) of the most recent forward, per layer.
  const RecurrentState& last_state() const { return last_; }

 private:
  struct Layer {
    std::size_t wx, wh, bias;
    std::size_t gain = 0;
    std::size_t proj = 0;
    bool has_proj = false;
    std::size_t in_width = 0;
  };

  bool v2_;
  bool stateful_ = false;
  bool layer_norm_ = false;
  bool residual_ = false;
  std::size_t hidden_ = 32;
  std::vector<Layer> layers_;
  std::size_t head_w_ = 0, head_b_ = 0;
  RecurrentState state_;
  RecurrentState last_;
};

}  // namespace tk::arch
