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

#include <span>
#include <string>
#include <string_view>

namespace tk {

// Hex-encoded SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const double> values);

// Incremental hashing for multi-part artifacts.
class Digester {
 public:
  Digester();
  ~Digester();
  Digester(const Digester&) = delete;
  Digester& operator=(const Digester&) = delete;

  Digester& update(std::string_view bytes);
  Digester& update(std::span<const double> values);
  std::string hex();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace tk
