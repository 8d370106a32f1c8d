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

#include "json.hpp"
#include "tk/timebase.hpp"

namespace tk::timebase {

nlohmann::json task_to_json(const TaskSpec& task);
// Errors: ConfigError for missing or malformed fields.
TaskSpec task_from_json(const nlohmann::json& j);

nlohmann::json scaler_to_json(const ScalerParams& scaler);
ScalerParams scaler_from_json(const nlohmann::json& j);

nlohmann::json points_to_json(std::span<const PredictionPoint> points);
std::vector<PredictionPoint> points_from_json(const nlohmann::json& j);

std::string scaler_digest(const ScalerParams& scaler);
std::string split_digest(const SplitAssignment& split);

}  // namespace tk::timebase
