// Copyright 2026 The faasfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Strict request validation for function payloads: unknown fields are
// rejected and types checked before a handler acts on anything.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

namespace faasfl {

enum class JsonType { kString, kUnsigned, kNumber, kBool, kObject, kArray };

struct FieldRule {
  std::string_view name;
  JsonType type;
  bool required = true;
};

// Throws InvalidRequest naming `what` and the offending field.
void check_fields(const nlohmann::json& object, std::initializer_list<FieldRule> rules,
                  std::string_view what);

// Typed accessors for fields already vetted by check_fields.
std::string get_string(const nlohmann::json& object, std::string_view key);
std::uint64_t get_unsigned(const nlohmann::json& object, std::string_view key);
double get_number(const nlohmann::json& object, std::string_view key);

}  // namespace faasfl
