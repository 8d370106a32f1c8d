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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tk {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node;

// Arguments handed to a primitive's local gradient rule. grad_in[i] is empty
// when input i does not take part in differentiation.
struct BackwardContext {
  std::span<const double> out_value;
  std::span<const double> grad_out;
  std::vector<std::span<const double>> in_value;
  std::vector<std::span<double>> grad_in;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // leaves only; empty until first backward
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  bool is_leaf() const { return !backward; }
};

}  // namespace detail

// Dense double-precision tensor handle. Copies share storage and graph
// position, the way framework tensors behave; use detach() for an
// independent leaf.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_ ? node_->value.size() : 0; }

  std::span<const double> values() const;
  // Writable view for leaves (optimizers, initializers). Throws on interior
  // nodes since their values are owned by the recorded graph.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool is_leaf() const { return !node_ || node_->is_leaf(); }
  const char* op_name() const { return node_ ? node_->op : "undefined"; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const double> grad() const;
  // Sets the stored gradient to zeros (allocating it if absent).
  void zero_grad();

  // New leaf holding a copy of the values, with no gradient history.
  Tensor detach() const;

  const detail::Node* id() const noexcept { return node_.get(); }

 private:
  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                            const char*, detail::BackwardFn);
  friend class Tape;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

// Creates an op output. The gradient rule is recorded only when gradient
// mode is on and at least one input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   const char* op, detail::BackwardFn backward);

bool grad_enabled();

// Disables recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct TapeEntry {
  const detail::Node* node;
  const char* op;
  std::size_t n_inputs;
};

// Linearized view of the graph reachable from a root, inputs before
// outputs. Only nodes that require gradients are included.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::span<const TapeEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  friend struct BackwardEngine;
  std::vector<TapeEntry> entries_;
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

struct BackwardReport {
  std::size_t tape_length = 0;
  // Leaves passed in `leaves` that the loss does not depend on. Their
  // gradients are set to zero.
  std::size_t disconnected_leaves = 0;
};

// Accumulates d(loss)/d(leaf) into every reachable leaf that requires a
// gradient, then clears the recorded graph below `loss`.
BackwardReport backward(const Tensor& loss, std::span<const Tensor> leaves = {});

// Returns d(loss)/d(w) for each tensor in `wrt` without touching any stored
// .grad field. The graph is cleared afterwards, as with backward().
std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> wrt);

}  // namespace tk
