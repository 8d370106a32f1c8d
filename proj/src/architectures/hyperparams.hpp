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

#include <algorithm>
#include <string>
#include <vector>

#include "tk/architectures.hpp"
#include "tk/error.hpp"

namespace tk::arch::detail {

// Typed access to ArchSpec::hyperparams with defaults. Unknown keys are
// rejected so typos surface at build time.
class HyperparamReader {
 public:
  HyperparamReader(const ArchSpec& spec, std::vector<std::string> allowed)
      : spec_(spec), params_(spec.hyperparams) {
    if (params_.is_null()) params_ = nlohmann::json::object();
    if (!params_.is_object()) bad("hyperparams must be a JSON object");
    for (const auto& [key, value] : params_.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        bad("unknown hyperparameter '" + key + "'");
      }
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!params_.contains(key)) return fallback;
    try {
      return params_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      bad("hyperparameter '" + key + "' has the wrong type");
    }
  }

  std::size_t positive(const std::string& key, std::size_t fallback) const {
    if (!params_.contains(key)) return fallback;
    const auto& v = params_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1) {
      bad("hyperparameter '" + key + "' must be a positive integer");
    }
    return v.get<std::size_t>();
  }

  double rate(const std::string& key, double fallback) const {
    const double r = get<double>(key, fallback);
    if (!(r >= 0.0 && r < 1.0)) bad("hyperparameter '" + key + "' must lie in [0, 1)");
    return r;
  }

  std::vector<std::size_t> sizes(const std::string& key, std::vector<std::size_t> fallback) const {
    if (!params_.contains(key)) return fallback;
    const auto& v = params_.at(key);
    if (v.is_number_integer()) return {positive(key, 1)};
    if (!v.is_array()) bad("hyperparameter '" + key + "' must be an integer list");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < 1) {
        bad("hyperparameter '" + key + "' must hold positive integers");
      }
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  bool has(const std::string& key) const { return params_.contains(key); }

  [[noreturn]] void bad(const std::string& message) const {
    fail(ErrorKind::IncompatibleHyperparams, spec_.name + ": " + message);
  }

 private:
  const ArchSpec& spec_;
  nlohmann::json params_;
};

}  // namespace tk::arch::detail
