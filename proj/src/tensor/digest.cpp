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

#include "tk/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "tk/error.hpp"

namespace tk {

struct Digester::Impl {
  EVP_MD_CTX* ctx = nullptr;
};

Digester::Digester() : impl_(new Impl) {
  impl_->ctx = EVP_MD_CTX_new();
  if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(impl_->ctx);
    delete impl_;
    fail(ErrorKind::IOFailure, "sha256 initialization failed");
  }
}

Digester::~Digester() {
  EVP_MD_CTX_free(impl_->ctx);
  delete impl_;
}

Digester& Digester::update(std::string_view bytes) {
  EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size());
  return *this;
}

Digester& Digester::update(std::span<const double> values) {
  EVP_DigestUpdate(impl_->ctx, values.data(), values.size_bytes());
  return *this;
}

std::string Digester::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, md.data(), &len);
  std::string out;
  out.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr);
  return out;
}

std::string sha256_hex(std::string_view bytes) { return Digester().update(bytes).hex(); }

std::string sha256_hex(std::span<const double> values) { return Digester().update(values).hex(); }

}  // namespace tk
