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
#include <map>
#include <mutex>

#include "tk/architectures.hpp"
#include "tk/error.hpp"
#include "tk/gradcheck.hpp"
#include "tk/ops.hpp"

namespace tk::arch {

TaskShape TaskShape::from_task(const timebase::TaskSpec& task) {
  TaskShape s;
  s.in_len = task.in_length();
  s.in_width = task.in_width();
  s.out_len = task.output_rows();
  s.out_width = task.output_cols();
  s.classification = task.kind == timebase::TaskKind::Classification;
  return s;
}

Model::Model(ArchSpec spec, TaskShape shape, std::uint64_t seed)
    : spec_(std::move(spec)), shape_(shape), seed_(seed), rng_(seed) {
  if (shape_.in_len == 0 || shape_.in_width == 0 || shape_.out_len == 0 || shape_.out_width == 0) {
    fail(ErrorKind::ShapeMismatch, spec_.name + ": task shapes must be non-empty");
  }
}

std::vector<Tensor> Model::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.push_back(p.value);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.emplace_back(p.value.values().begin(), p.value.values().end());
  return out;
}

void Model::load(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) {
    fail(ErrorKind::ShapeMismatch, spec_.name + ": expected " + std::to_string(params_.size()) +
                                       " parameter tensors, got " + std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = params_[i].value.mutable_values();
    if (dst.size() != values[i].size()) {
      fail(ErrorKind::ShapeMismatch, spec_.name + ": parameter '" + params_[i].name +
                                         "' size mismatch");
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void Model::reset_state() {
  fail(ErrorKind::NotStateful, spec_.name + " does not carry state");
}

void Model::detach_state() {
  fail(ErrorKind::NotStateful, spec_.name + " does not carry state");
}

Tensor& Model::add_weight(const std::string& name, Shape shape, std::size_t fan_in, double gain) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = dist(rng_);
  params_.push_back({name, Tensor(std::move(shape), std::move(values), true)});
  return params_.back().value;
}

Tensor& Model::add_constant(const std::string& name, Shape shape, double value) {
  params_.push_back({name, Tensor::full(std::move(shape), value, true)});
  return params_.back().value;
}

void Model::check_input(const Tensor& x, bool check_length) const {
  const bool ok = x.rank() == 3 && x.dim(0) >= 1 && x.dim(2) == shape_.in_width &&
                  x.dim(1) >= 1 && (!check_length || x.dim(1) == shape_.in_len);
  if (!ok) {
    fail(ErrorKind::ShapeMismatch, spec_.name + ": expected input (B, " + std::to_string(shape_.in_len) +
                                       ", " + std::to_string(shape_.in_width) + "), got " +
                                       shape_string(x.shape()));
  }
}

Tensor Model::dropout(const Tensor& x, double rate) {
  if (!training_ || rate <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> mask(x.size());
  const double scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = keep(rng_) ? scale : 0.0;
  return ops::mul(x, Tensor(x.shape(), std::move(mask)));
}

Tensor Model::reshape_output(const Tensor& flat) const {
  return ops::reshape(flat, {flat.dim(0), shape_.out_len, shape_.out_width});
}

namespace {

struct Registry {
  std::mutex mu;
  std::map<std::string, Constructor> constructors;

  Registry() {
    constructors["mlp"] = [](const ArchSpec& s, const TaskShape& t, std::uint64_t seed) {
      return std::make_unique<Mlp>(s, t, seed);
    };
    constructors["tcn"] = [](const ArchSpec& s, const TaskShape& t, std::uint64_t seed) {
      return std::make_unique<ConvNet>(s, t, seed, true);
    };
    constructors["cnn"] = [](const ArchSpec& s, const TaskShape& t, std::uint64_t seed) {
      return std::make_unique<ConvNet>(s, t, seed, false);
    };
    constructors["lstm"] = [](const ArchSpec& s, const TaskShape& t, std::uint64_t seed) {
      return std::make_unique<Lstm>(s, t, seed, false);
    };
    constructors["lstmv2"] = [](const ArchSpec& s, const TaskShape& t, std::uint64_t seed) {
      return std::make_unique<Lstm>(s, t, seed, true);
    };
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

[[noreturn]] void violation(const std::string& name, const std::string& check,
                            const std::string& detail) {
  fail(ErrorKind::ContractViolation, "ContractViolation(" + check + "): " + name + ": " + detail);
}

}  // namespace

std::unique_ptr<Model> build_model(const ArchSpec& spec, const TaskShape& shape, std::uint64_t seed) {
  Constructor ctor;
  {
    Registry& r = registry();
    std::lock_guard lock(r.mu);
    auto it = r.constructors.find(spec.name);
    if (it == r.constructors.end()) {
      fail(ErrorKind::UnknownArchitecture, "unknown architecture '" + spec.name + "'");
    }
    ctor = it->second;
  }
  return ctor(spec, shape, seed);
}

std::unique_ptr<Model> build_model(const ArchSpec& spec, const timebase::TaskSpec& task,
                                   std::uint64_t seed) {
  return build_model(spec, TaskShape::from_task(task), seed);
}

bool is_registered(const std::string& name) {
  Registry& r = registry();
  std::lock_guard lock(r.mu);
  return r.constructors.count(name) > 0;
}

std::vector<std::string> registered_architectures() {
  Registry& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> out;
  for (const auto& [name, ctor] : r.constructors) out.push_back(name);
  return out;
}

void check_conformance(const std::string& name, const Constructor& constructor,
                       const nlohmann::json& hyperparams) {
  const ArchSpec spec{name, hyperparams};
  const std::vector<TaskShape> probes = {
      {4, 2, 1, 1, false}, {6, 3, 2, 2, false}, {5, 2, 1, 3, true}, {8, 1, 3, 1, false}};
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::size_t built = 0;

  for (const TaskShape& probe : probes) {
    std::unique_ptr<Model> model;
    try {
      model = constructor(spec, probe, 17);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::IncompatibleHyperparams) continue;
      violation(name, "construction", e.what());
    }
    if (!model) violation(name, "construction", "constructor returned no model");
    ++built;

    std::vector<double> xv(2 * probe.in_len * probe.in_width);
    for (double& v : xv) v = dist(rng);
    const Tensor x({2, probe.in_len, probe.in_width}, xv);
    const Shape expected{2, probe.out_len, probe.out_width};

    Tensor y;
    try {
      NoGradGuard no_grad;
      y = model->forward(x);
    } catch (const Error& e) {
      violation(name, "shape", e.what());
    }
    if (y.shape() != expected) {
      violation(name, "shape", "forward returned " + shape_string(y.shape()) + ", expected " +
                                   shape_string(expected));
    }

    auto twin = constructor(spec, probe, 17);
    if (!twin || twin->snapshot() != model->snapshot()) {
      violation(name, "determinism", "same seed produced different parameters");
    }
    {
      NoGradGuard no_grad;
      if (model->stateful()) model->reset_state();
      Tensor again = model->forward(x);
      if (model->stateful()) model->reset_state();
      if (!std::equal(again.values().begin(), again.values().end(), y.values().begin())) {
        violation(name, "determinism", "repeated forward differs");
      }
    }

    // Gradients are checked at a jittered, generic parameter point.
    for (Parameter& p : model->parameters()) {
      for (double& v : p.value.mutable_values()) v += 0.1 * dist(rng);
    }
    std::vector<double> weights(y.size());
    for (double& w : weights) w = dist(rng);
    Model* m = model.get();
    auto fn = [m, &weights, &expected](const std::vector<Tensor>& in) {
      if (m->stateful()) m->reset_state();
      Tensor out = m->forward(in[0]);
      return ops::sum(ops::mul(out, Tensor(expected, weights)));
    };
    std::vector<Tensor> inputs{Tensor(x.shape(), xv)};
    for (const Tensor& p : model->parameter_tensors()) inputs.push_back(p);
    GradCheckOptions options;
    options.extrapolate = true;
    GradCheckResult r = check_gradients(fn, inputs, options);
    if (!r.ok) {
      // A kink within one step of the probe point; a smaller step steps past it.
      options.step = 1e-5;
      const GradCheckResult fine = check_gradients(fn, inputs, options);
      if (fine.ok) r = fine;
    }
    if (m->stateful()) m->reset_state();
    if (!r.ok) {
      violation(name, "gradient", "max relative error " + std::to_string(r.max_error) +
                                      " (analytic " + std::to_string(r.worst_analytic) +
                                      ", numeric " + std::to_string(r.worst_numeric) + ")");
    }
  }
  if (built == 0) violation(name, "shape", "constructor rejected every probe shape");
}

void register_architecture(const std::string& name, Constructor constructor) {
  if (name.empty()) fail(ErrorKind::InvalidArgument, "architecture name must be non-empty");
  if (is_registered(name)) {
    fail(ErrorKind::DuplicateName, "architecture '" + name + "' is already registered");
  }
  check_conformance(name, constructor);
  Registry& r = registry();
  std::lock_guard lock(r.mu);
  if (!r.constructors.emplace(name, std::move(constructor)).second) {
    fail(ErrorKind::DuplicateName, "architecture '" + name + "' is already registered");
  }
}

void reset_state(Model& model) { model.reset_state(); }
void detach_state(Model& model) { model.detach_state(); }

}  // namespace tk::arch
