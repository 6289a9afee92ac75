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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "faasfl/tensor.hpp"

namespace faasfl {

using Bytes = std::vector<std::uint8_t>;

// Little-endian container:
//   u32 entry_count
//   per entry: u32 name_len, name (UTF-8), u32 rank, u64 dims[rank],
//              f64 payload[product(dims)]
Bytes encode_parameters(const ParameterSet& params);

// Throws CorruptionError on truncated or malformed input.
ParameterSet decode_parameters(std::span<const std::uint8_t> bytes);

// Exact byte length encode_parameters would produce.
std::size_t encoded_size(const ParameterSet& params);

Bytes read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace faasfl
