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

// Thin wrappers over OpenSSL: SHA-256, Ed25519, base64url and randomness.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faasfl::crypto {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

// Incremental hashing for multi-part inputs.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::uint8_t> data);
  Sha256& update(std::string_view data);
  Digest finish();

 private:
  void* ctx_;
};

std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<Digest> digest_from_hex(std::string_view hex);

// First 8 digest bytes as an integer; stable across platforms and runs.
std::uint64_t stable_hash64(std::string_view data);

std::string base64url_encode(std::span<const std::uint8_t> data);
std::string base64url_encode(std::string_view data);
// Strict decoding: rejects padding, foreign characters and non-canonical
// trailing bits, so every accepted string has exactly one byte sequence.
std::optional<std::vector<std::uint8_t>> base64url_decode(std::string_view text);

std::vector<std::uint8_t> random_bytes(std::size_t n);

// Constant-time comparison.
bool secure_equal(std::string_view a, std::string_view b);

using PublicKey = std::array<std::uint8_t, 32>;

/// Ed25519 signing key. The public half is exported raw for distribution.
class SigningKey {
 public:
  static SigningKey generate();
  static SigningKey from_seed(std::span<const std::uint8_t, 32> seed);

  SigningKey(SigningKey&&) noexcept;
  SigningKey& operator=(SigningKey&&) noexcept;
  SigningKey(const SigningKey&) = delete;
  SigningKey& operator=(const SigningKey&) = delete;
  ~SigningKey();

  const PublicKey& public_key() const noexcept { return public_; }
  std::vector<std::uint8_t> sign(std::string_view message) const;

 private:
  explicit SigningKey(void* pkey);
  void* pkey_ = nullptr;
  PublicKey public_{};
};

bool verify_signature(const PublicKey& key, std::string_view message,
                      std::span<const std::uint8_t> signature);

}  // namespace faasfl::crypto
