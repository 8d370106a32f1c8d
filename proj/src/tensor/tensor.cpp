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

#include "tk/tensor.hpp"

#include <numeric>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "tk/error.hpp"

namespace tk {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<std::size_t>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    fail(ErrorKind::ShapeMismatch, "tensor shape " + shape_string(shape) + " does not hold " +
                                       std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

const Shape& Tensor::shape() const {
  static const Shape kEmpty;
  return node_ ? node_->shape : kEmpty;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    fail(ErrorKind::ShapeMismatch, "axis " + std::to_string(axis) + " out of range for shape " +
                                       shape_string(s));
  }
  return s[axis];
}

std::span<const double> Tensor::values() const {
  if (!node_) return {};
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) return {};
  if (!node_->is_leaf()) {
    fail(ErrorKind::InvalidArgument, "cannot write values of a recorded op output");
  }
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) {
    fail(ErrorKind::NotScalar, "item() on tensor of shape " + shape_string(shape()));
  }
  return node_->value[0];
}

void Tensor::set_requires_grad(bool flag) {
  if (!node_) return;
  if (!node_->is_leaf()) {
    fail(ErrorKind::InvalidArgument, "requires_grad can only be set on leaves");
  }
  node_->requires_grad = flag;
}

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  return Tensor(node_->shape, node_->value, false);
}

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   const char* op, detail::BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  if (g_grad_enabled) {
    bool any = false;
    for (const Tensor& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->backward = std::move(backward);
      node->inputs.reserve(inputs.size());
      for (const Tensor& in : inputs) node->inputs.push_back(in.node_);
    }
  }
  return Tensor(std::move(node));
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.requires_grad()) return tape;

  std::unordered_map<const detail::Node*, bool> visited;
  // (node, next input to visit)
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root.node_, 0);
  visited[root.node_.get()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      std::shared_ptr<detail::Node> child = node->inputs[next++];
      if (child->requires_grad && !visited[child.get()]) {
        visited[child.get()] = true;
        stack.emplace_back(std::move(child), 0);
      }
      continue;
    }
    tape.entries_.push_back({node.get(), node->op, node->inputs.size()});
    tape.nodes_.push_back(node);
    stack.pop_back();
  }
  return tape;
}

struct BackwardEngine {
  Tape tape;
  std::unordered_map<const detail::Node*, std::size_t> index;
  std::vector<std::vector<double>> buffers;

  explicit BackwardEngine(const Tensor& loss) {
    if (!loss.defined()) fail(ErrorKind::InvalidArgument, "backward on undefined tensor");
    if (loss.size() != 1) {
      fail(ErrorKind::NotScalar, "backward requires a scalar loss, got shape " +
                                     shape_string(loss.shape()));
    }
    tape = Tape::record(loss);
    buffers.resize(tape.size());
    for (std::size_t i = 0; i < tape.size(); ++i) index[tape.nodes_[i].get()] = i;
  }

  void run() {
    if (tape.size() == 0) return;
    buffers.back().assign(1, 1.0);
    for (std::size_t i = tape.size(); i-- > 0;) {
      detail::Node& node = *tape.nodes_[i];
      if (node.is_leaf() || buffers[i].empty()) continue;
      detail::BackwardContext ctx;
      ctx.out_value = node.value;
      ctx.grad_out = buffers[i];
      ctx.in_value.reserve(node.inputs.size());
      ctx.grad_in.reserve(node.inputs.size());
      for (const auto& in : node.inputs) {
        ctx.in_value.emplace_back(in->value);
        if (in->requires_grad) {
          std::vector<double>& buf = buffers[index.at(in.get())];
          if (buf.empty()) buf.assign(in->value.size(), 0.0);
          ctx.grad_in.emplace_back(buf);
        } else {
          ctx.grad_in.emplace_back();
        }
      }
      node.backward(ctx);
    }
  }

  detail::Node& node(std::size_t i) { return *tape.nodes_[i]; }

  void clear() {
    for (auto& node : tape.nodes_) {
      if (node->is_leaf()) continue;
      node->inputs.clear();
      node->backward = nullptr;
      node->requires_grad = false;
    }
  }
};

BackwardReport backward(const Tensor& loss, std::span<const Tensor> leaves) {
  BackwardEngine engine(loss);
  engine.run();
  for (std::size_t i = 0; i < engine.tape.size(); ++i) {
    detail::Node& node = engine.node(i);
    if (!node.is_leaf()) continue;
    if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
    const std::vector<double>& buf = engine.buffers[i];
    for (std::size_t k = 0; k < buf.size(); ++k) node.grad[k] += buf[k];
  }
  BackwardReport report;
  report.tape_length = engine.tape.size();
  for (const Tensor& leaf : leaves) {
    if (!leaf.defined() || engine.index.count(leaf.id())) continue;
    ++report.disconnected_leaves;
    Tensor handle = leaf;
    handle.zero_grad();
  }
  engine.clear();
  return report;
}

std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> wrt) {
  BackwardEngine engine(loss);
  engine.run();
  std::vector<std::vector<double>> out;
  out.reserve(wrt.size());
  for (const Tensor& t : wrt) {
    auto it = engine.index.find(t.id());
    if (it == engine.index.end() || engine.buffers[it->second].empty()) {
      out.emplace_back(t.size(), 0.0);
    } else {
      out.push_back(engine.buffers[it->second]);
    }
  }
  engine.clear();
  return out;
}

}  // namespace tk
