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

#include "faasfl/auth.hpp"

#include <algorithm>

#include <json.hpp>

#include "faasfl/error.hpp"

namespace faasfl::auth {
namespace {

using nlohmann::json;

constexpr std::string_view kAlgorithm = "EdDSA";

Validation reject(RejectReason reason) {
  Validation v;
  v.reason = reason;
  return v;
}

std::optional<json> decode_json_part(std::string_view part) {
  auto raw = crypto::base64url_decode(part);
  if (!raw) return std::nullopt;
  json j = json::parse(raw->begin(), raw->end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  // Only the canonical encoding is acceptable.
  const std::string canonical = j.dump();
  if (canonical.size() != raw->size() || !std::equal(canonical.begin(), canonical.end(), raw->begin())) {
    return std::nullopt;
  }
  return j;
}

}  // namespace

std::string_view reject_reason_name(RejectReason reason) {
  switch (reason) {
    case RejectReason::kBadSignature: return "bad_signature";
    case RejectReason::kExpired: return "expired";
    case RejectReason::kInsufficientScope: return "insufficient_scope";
    case RejectReason::kWrongIssuer: return "wrong_issuer";
    case RejectReason::kMissingApiToken: return "missing_api_token";
  }
  return "unknown";
}

void KeyDirectory::publish(const std::string& issuer, const std::string& key_id,
                           const crypto::PublicKey& key) {
  std::unique_lock lock(mu_);
  keys_[{issuer, key_id}] = key;
}

std::optional<crypto::PublicKey> KeyDirectory::fetch(const std::string& issuer,
                                                     const std::string& key_id) const {
  fetches_.fetch_add(1);
  std::shared_lock lock(mu_);
  auto it = keys_.find({issuer, key_id});
  if (it == keys_.end()) return std::nullopt;
  return it->second;
}

AuthServer::AuthServer(std::string issuer, std::shared_ptr<KeyDirectory> directory,
                       std::shared_ptr<const Clock> clock, double token_ttl_s,
                       std::optional<std::uint64_t> seed)
    : issuer_(std::move(issuer)),
      directory_(std::move(directory)),
      clock_(std::move(clock)),
      ttl_(token_ttl_s),
      seed_(seed) {
  if (!(ttl_ > 0.0)) throw InvalidArgument("token ttl must be positive");
  rotate_key();
}

std::string AuthServer::rotate_key() {
  std::lock_guard lock(mu_);
  const std::uint64_t gen = generation_++;
  if (seed_) {
    const auto seed = crypto::sha256("signing-key/" + issuer_ + "/" + std::to_string(*seed_) + "/" +
                                     std::to_string(gen));
    key_ = std::make_unique<crypto::SigningKey>(crypto::SigningKey::from_seed(seed));
  } else {
    key_ = std::make_unique<crypto::SigningKey>(crypto::SigningKey::generate());
  }
  key_id_ = "key-" + std::to_string(gen) + "-" +
            crypto::to_hex(std::span(key_->public_key()).first(4));
  directory_->publish(issuer_, key_id_, key_->public_key());
  return key_id_;
}

std::string AuthServer::key_id() const {
  std::lock_guard lock(mu_);
  return key_id_;
}

void AuthServer::register_server(const ServerCredentials& creds, std::set<std::string> scopes) {
  std::lock_guard lock(mu_);
  servers_[creds.client_id] = {crypto::sha256(creds.client_secret), std::move(scopes)};
}

InvocationToken AuthServer::fetch_token(const ServerCredentials& creds) {
  std::set<std::string> scopes;
  {
    std::lock_guard lock(mu_);
    auto it = servers_.find(creds.client_id);
    if (it == servers_.end() || crypto::sha256(creds.client_secret) != it->second.secret_hash) {
      throw AuthenticationError("invalid server credentials for '" + creds.client_id + "'");
    }
    scopes = it->second.scopes;
  }
  return sign(creds.client_id, std::move(scopes), ttl_);
}

InvocationToken AuthServer::sign(std::string subject, std::set<std::string> scopes, double ttl_s) {
  if (!(ttl_s > 0.0)) throw InvalidArgument("token ttl must be positive");
  std::lock_guard lock(mu_);
  InvocationToken t;
  t.issuer = issuer_;
  t.subject = std::move(subject);
  t.scopes = std::move(scopes);
  t.issued_at = clock_->now();
  t.expiry = t.issued_at + ttl_s;
  t.key_id = key_id_;
  t.nonce = std::to_string(nonce_++);

  const json header = {{"alg", kAlgorithm}, {"kid", t.key_id}, {"typ", "JWT"}};
  const json payload = {{"exp", t.expiry},  {"iat", t.issued_at}, {"iss", t.issuer},
                        {"nonce", t.nonce}, {"scope", t.scopes},  {"sub", t.subject}};
  const std::string signing_input =
      crypto::base64url_encode(header.dump()) + "." + crypto::base64url_encode(payload.dump());
  t.encoded = signing_input + "." + crypto::base64url_encode(key_->sign(signing_input));
  return t;
}

std::optional<crypto::PublicKey> TokenVerifier::key_for(const std::string& issuer,
                                                        const std::string& key_id) {
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find({issuer, key_id});
    if (it != cache_.end()) return it->second;
  }
  fetches_.fetch_add(1);
  auto key = directory_->fetch(issuer, key_id);
  if (key) {
    std::lock_guard lock(mu_);
    cache_[{issuer, key_id}] = *key;
  }
  return key;
}

Validation TokenVerifier::validate(std::string_view token, const ClientAuthPolicy& policy,
                                   double now, std::optional<std::string_view> api_token) {
  const auto dot1 = token.find('.');
  const auto dot2 = dot1 == std::string_view::npos ? dot1 : token.find('.', dot1 + 1);
  if (dot2 == std::string_view::npos || token.find('.', dot2 + 1) != std::string_view::npos) {
    return reject(RejectReason::kBadSignature);
  }
  const auto header = decode_json_part(token.substr(0, dot1));
  const auto payload = decode_json_part(token.substr(dot1 + 1, dot2 - dot1 - 1));
  const auto signature = crypto::base64url_decode(token.substr(dot2 + 1));
  if (!header || !payload || !signature) return reject(RejectReason::kBadSignature);

  const auto alg = header->find("alg");
  const auto kid = header->find("kid");
  if (alg == header->end() || !alg->is_string() || *alg != kAlgorithm || kid == header->end() ||
      !kid->is_string()) {
    return reject(RejectReason::kBadSignature);
  }
  const auto iss = payload->find("iss");
  if (iss == payload->end() || !iss->is_string()) return reject(RejectReason::kBadSignature);
  if (iss->get<std::string>() != policy.trusted_issuer) return reject(RejectReason::kWrongIssuer);

  const auto key = key_for(policy.trusted_issuer, kid->get<std::string>());
  if (!key) return reject(RejectReason::kBadSignature);
  if (!crypto::verify_signature(*key, token.substr(0, dot2), *signature)) {
    return reject(RejectReason::kBadSignature);
  }

  // The payload is authentic from here on; still refuse malformed claims.
  const auto exp = payload->find("exp");
  const auto sub = payload->find("sub");
  const auto scope = payload->find("scope");
  if (exp == payload->end() || !exp->is_number() || sub == payload->end() || !sub->is_string() ||
      scope == payload->end() || !scope->is_array()) {
    return reject(RejectReason::kBadSignature);
  }
  if (!(now < exp->get<double>())) return reject(RejectReason::kExpired);

  std::set<std::string> scopes;
  for (const auto& s : *scope) {
    if (!s.is_string()) return reject(RejectReason::kBadSignature);
    scopes.insert(s.get<std::string>());
  }
  if (!std::includes(scopes.begin(), scopes.end(), policy.required_scopes.begin(),
                     policy.required_scopes.end())) {
    return reject(RejectReason::kInsufficientScope);
  }
  if (policy.extra_api_token &&
      (!api_token || !crypto::secure_equal(*api_token, *policy.extra_api_token))) {
    return reject(RejectReason::kMissingApiToken);
  }

  Validation v;
  v.accepted = true;
  v.subject = sub->get<std::string>();
  v.scopes = std::move(scopes);
  return v;
}

}  // namespace faasfl::auth
