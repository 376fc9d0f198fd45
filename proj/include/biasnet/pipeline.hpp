/*
 * Copyright 2026 The biasnet Authors.
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

// Command-level workflows. Each takes a JSON config, fills defaults, rejects
// unknown keys, writes its outputs plus the resolved config, and returns a
// JSON summary.

#ifndef BIASNET_PIPELINE_HPP_
#define BIASNET_PIPELINE_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace biasnet::pipeline {

inline constexpr char kCacheDirEnv[] = "BIASNET_CACHE_DIR";

std::vector<std::string> Commands();

// Complete default config for a command; required paths are "".
nlohmann::json Defaults(std::string_view command);
// Defaults overlaid with config. Unknown keys and missing required paths are
// errors.
nlohmann::json Resolve(std::string_view command, const nlohmann::json& config);

// Dispatches to the functions below after resolving.
nlohmann::json Run(std::string_view command, const nlohmann::json& config);

nlohmann::json PrepareData(const nlohmann::json& config);
nlohmann::json Train(const nlohmann::json& config);
nlohmann::json Evaluate(const nlohmann::json& config);
nlohmann::json Stats(const nlohmann::json& config);
nlohmann::json AnalyzeStructure(const nlohmann::json& config);
nlohmann::json ExtractMainSentences(const nlohmann::json& config);

}  // namespace biasnet::pipeline

#endif  // BIASNET_PIPELINE_HPP_
