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

#include <stdexcept>
#include <string>
#include <string_view>

namespace tk {

enum class ErrorKind {
  // timebase
  NonMonotonicTimestamps,
  OffGridTimestamp,
  MissingComponent,
  NonNumericValue,
  EmptyTask,
  OutOfRange,
  DegenerateSplit,
  // tensor core
  ShapeMismatch,
  NonPositiveDilation,
  NotScalar,
  // architectures
  UnknownArchitecture,
  IncompatibleHyperparams,
  StateShapeMismatch,
  NotStateful,
  DuplicateName,
  ContractViolation,
  // trainer
  NonFiniteLoss,
  EmptyTrainSplit,
  UnknownSplit,
  // interpreter
  KTooLarge,
  NonFiniteGradient,
  EmptyResults,
  // general
  InvalidArgument,
  ConfigError,
  Conflict,
  NotFound,
  IOFailure,
};

std::string_view error_kind_name(ErrorKind kind);

// Every recoverable failure in the toolkit is reported as a tk::Error. The
// kind is stable and machine readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view kind_name() const { return error_kind_name(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tk
