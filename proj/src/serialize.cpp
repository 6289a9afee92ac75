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

#include "faasfl/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "faasfl/error.hpp"

namespace faasfl {
namespace {

static_assert(std::endian::native == std::endian::little,
              "the parameter container is written with native little-endian stores");
static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

template <typename T>
void put(Bytes& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void get_doubles(std::span<double> out) {
    const std::size_t n = out.size() * sizeof(double);
    need(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw CorruptionError("parameter container truncated at byte " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t encoded_size(const ParameterSet& params) {
  std::size_t n = sizeof(std::uint32_t);
  for (const auto& e : params) {
    n += sizeof(std::uint32_t) + e.name.size() + sizeof(std::uint32_t) +
         e.tensor.rank() * sizeof(std::uint64_t) + e.tensor.size() * sizeof(double);
  }
  return n;
}

Bytes encode_parameters(const ParameterSet& params) {
  Bytes out;
  out.reserve(encoded_size(params));
  put(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params) {
    put(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.shape()) put(out, static_cast<std::uint64_t>(d));
    const auto data = e.tensor.data();
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
    out.insert(out.end(), p, p + data.size_bytes());
  }
  return out;
}

ParameterSet decode_parameters(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto count = r.get<std::uint32_t>();
  ParameterSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.get_string(name_len);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 16) throw CorruptionError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      const auto dim = r.get<std::uint64_t>();
      if (dim == 0 || dim > bytes.size()) {
        throw CorruptionError("implausible dimension in tensor '" + name + "'");
      }
      d = static_cast<std::size_t>(dim);
      total *= d;
      if (total > bytes.size()) {
        throw CorruptionError("tensor '" + name + "' larger than the container");
      }
    }
    std::vector<double> data(total);
    r.get_doubles(data);
    try {
      params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
    } catch (const InvalidArgument& e) {
      throw CorruptionError(e.what());
    }
  }
  if (!r.done()) throw CorruptionError("trailing bytes after parameter container");
  return params;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace faasfl
