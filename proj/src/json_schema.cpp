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

#include "faasfl/json_schema.hpp"

#include <algorithm>
#include <cmath>

#include "faasfl/error.hpp"

namespace faasfl {
namespace {

std::string_view type_name(JsonType t) {
  switch (t) {
    case JsonType::kString: return "string";
    case JsonType::kUnsigned: return "non-negative integer";
    case JsonType::kNumber: return "number";
    case JsonType::kBool: return "boolean";
    case JsonType::kObject: return "object";
    case JsonType::kArray: return "array";
  }
  return "?";
}

bool has_type(const nlohmann::json& v, JsonType t) {
  switch (t) {
    case JsonType::kString: return v.is_string();
    case JsonType::kUnsigned: return v.is_number_unsigned();
    case JsonType::kNumber: return v.is_number() && std::isfinite(v.get<double>());
    case JsonType::kBool: return v.is_boolean();
    case JsonType::kObject: return v.is_object();
    case JsonType::kArray: return v.is_array();
  }
  return false;
}

}  // namespace

void check_fields(const nlohmann::json& object, std::initializer_list<FieldRule> rules,
                  std::string_view what) {
  if (!object.is_object()) throw InvalidRequest(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : object.items()) {
    auto rule = std::find_if(rules.begin(), rules.end(), [&](const FieldRule& r) { return r.name == key; });
    if (rule == rules.end()) {
      throw InvalidRequest(std::string(what) + ": unknown field '" + key + "'");
    }
    if (!has_type(value, rule->type)) {
      throw InvalidRequest(std::string(what) + ": field '" + key + "' must be a " +
                           std::string(type_name(rule->type)));
    }
  }
  for (const auto& r : rules) {
    if (r.required && !object.contains(r.name)) {
      throw InvalidRequest(std::string(what) + ": missing field '" + std::string(r.name) + "'");
    }
  }
}

std::string get_string(const nlohmann::json& object, std::string_view key) {
  return object.at(std::string(key)).get<std::string>();
}

std::uint64_t get_unsigned(const nlohmann::json& object, std::string_view key) {
  return object.at(std::string(key)).get<std::uint64_t>();
}

double get_number(const nlohmann::json& object, std::string_view key) {
  return object.at(std::string(key)).get<double>();
}

}  // namespace faasfl
