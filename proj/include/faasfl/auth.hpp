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

// Invocation tokens: header.payload.signature, each part base64url without
// padding. Header and payload are key-ordered compact JSON; the signature is
// Ed25519 over the ASCII bytes "header.payload".

#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "faasfl/clock.hpp"
#include "faasfl/crypto.hpp"

namespace faasfl::auth {

inline constexpr double kDefaultTokenTtl = 15.0 * 60.0;

inline constexpr std::string_view kScopeInvokeClients = "invoke:clients";
inline constexpr std::string_view kScopeInvokeAggregator = "invoke:aggregator";
inline constexpr std::string_view kScopeEvaluate = "evaluate";

enum class RejectReason {
  kBadSignature,
  kExpired,
  kInsufficientScope,
  kWrongIssuer,
  kMissingApiToken,
};

std::string_view reject_reason_name(RejectReason reason);

struct ServerCredentials {
  std::string client_id;
  std::string client_secret;
};

struct InvocationToken {
  std::string issuer;
  std::string subject;
  std::set<std::string> scopes;
  double issued_at = 0.0;
  double expiry = 0.0;
  std::string key_id;
  std::string nonce;
  std::string encoded;
};

/// Public-key distribution point (the issuer's JWKS endpoint, in effect).
/// Every lookup counts as one remote fetch.
class KeyDirectory {
 public:
  void publish(const std::string& issuer, const std::string& key_id, const crypto::PublicKey& key);
  std::optional<crypto::PublicKey> fetch(const std::string& issuer, const std::string& key_id) const;
  std::size_t fetch_count() const noexcept { return fetches_.load(); }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::string>, crypto::PublicKey> keys_;
  mutable std::atomic<std::size_t> fetches_{0};
};

class AuthServer {
 public:
  // `seed` makes key material (and so every token) reproducible.
  AuthServer(std::string issuer, std::shared_ptr<KeyDirectory> directory,
             std::shared_ptr<const Clock> clock, double token_ttl_s = kDefaultTokenTtl,
             std::optional<std::uint64_t> seed = std::nullopt);

  void register_server(const ServerCredentials& creds, std::set<std::string> scopes);

  // Throws AuthenticationError for unknown ids or wrong secrets.
  InvocationToken fetch_token(const ServerCredentials& creds);

  // Issues a token with arbitrary claims under the current key. Used by
  // operators and tests that need tokens outside the registered scope sets.
  InvocationToken sign(std::string subject, std::set<std::string> scopes, double ttl_s);

  // New signing key under a new key id, published immediately. Returns the id.
  std::string rotate_key();

  const std::string& issuer() const noexcept { return issuer_; }
  std::string key_id() const;

 private:
  struct Registration {
    crypto::Digest secret_hash;
    std::set<std::string> scopes;
  };

  std::string issuer_;
  std::shared_ptr<KeyDirectory> directory_;
  std::shared_ptr<const Clock> clock_;
  double ttl_;
  std::optional<std::uint64_t> seed_;

  mutable std::mutex mu_;
  std::map<std::string, Registration> servers_;
  std::unique_ptr<crypto::SigningKey> key_;
  std::string key_id_;
  std::uint64_t generation_ = 0;
  std::uint64_t nonce_ = 0;
};

/// What a client function enforces on incoming tokens.
struct ClientAuthPolicy {
  std::string trusted_issuer;
  std::set<std::string> required_scopes;
  std::optional<std::string> extra_api_token;
};

struct Validation {
  bool accepted = false;
  std::optional<RejectReason> reason;
  std::string subject;
  std::set<std::string> scopes;

  explicit operator bool() const noexcept { return accepted; }
};

/// Validates tokens, caching verification keys by (issuer, key id) so a warm
/// function instance fetches each key once.
class TokenVerifier {
 public:
  explicit TokenVerifier(std::shared_ptr<const KeyDirectory> directory)
      : directory_(std::move(directory)) {}

  Validation validate(std::string_view token, const ClientAuthPolicy& policy, double now,
                      std::optional<std::string_view> api_token = std::nullopt);

  // Fetches made by this verifier.
  std::size_t key_fetches() const noexcept { return fetches_.load(); }

 private:
  std::optional<crypto::PublicKey> key_for(const std::string& issuer, const std::string& key_id);

  std::shared_ptr<const KeyDirectory> directory_;
  std::mutex mu_;
  std::map<std::pair<std::string, std::string>, crypto::PublicKey> cache_;
  std::atomic<std::size_t> fetches_{0};
};

}  // namespace faasfl::auth
