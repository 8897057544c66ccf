// Copyright (c) 2026 The vstyle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VSTYLE_CONFIG_HPP_
#define VSTYLE_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "vstyle/model.hpp"

namespace vstyle::config {

// key=value text with '#' comments; keys sort canonically in serialization so
// hashes are layout-independent.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text, const std::string& origin);
KvMap parse_kv_file(const std::string& path);
std::string serialize_kv(const KvMap& kv);

std::uint64_t fnv1a(const std::string& s);

KvMap model_to_kv(const model::ModelConfig& cfg);
// Unknown keys are ignored so one file can carry model and run settings.
model::ModelConfig model_from_kv(const KvMap& kv);
std::uint64_t model_config_hash(const model::ModelConfig& cfg);

}  // namespace vstyle::config

#endif  // VSTYLE_CONFIG_HPP_
