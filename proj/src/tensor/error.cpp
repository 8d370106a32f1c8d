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

#include "tk/error.hpp"

namespace tk {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorKind::OffGridTimestamp: return "OffGridTimestamp";
    case ErrorKind::MissingComponent: return "MissingComponent";
    case ErrorKind::NonNumericValue: return "NonNumericValue";
    case ErrorKind::EmptyTask: return "EmptyTask";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonPositiveDilation: return "NonPositiveDilation";
    case ErrorKind::NotScalar: return "NotScalar";
    case ErrorKind::UnknownArchitecture: return "UnknownArchitecture";
    case ErrorKind::IncompatibleHyperparams: return "IncompatibleHyperparams";
    case ErrorKind::StateShapeMismatch: return "StateShapeMismatch";
    case ErrorKind::NotStateful: return "NotStateful";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::ContractViolation: return "ContractViolation";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyTrainSplit: return "EmptyTrainSplit";
    case ErrorKind::UnknownSplit: return "UnknownSplit";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::EmptyResults: return "EmptyResults";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::Conflict: return "Conflict";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::IOFailure: return "IOFailure";
  }
  return "Unknown";
}

}  // namespace tk
