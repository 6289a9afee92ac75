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

#include "faasfl/function_support.hpp"

#include "faasfl/json_schema.hpp"

namespace faasfl {
namespace {

std::shared_ptr<auth::TokenVerifier> verifier_for(
    NamespaceCache& cache, const std::shared_ptr<const auth::KeyDirectory>& keys) {
  if (auto* hit = cache.get("token_verifier")) {
    if (auto* v = std::any_cast<std::shared_ptr<auth::TokenVerifier>>(hit)) return *v;
  }
  auto v = std::make_shared<auth::TokenVerifier>(keys);
  cache.put("token_verifier", v);
  return v;
}

}  // namespace

StoreCredential credential_from_json(const nlohmann::json& j) {
  check_fields(j, {{"principal", JsonType::kString}, {"secret", JsonType::kString}},
               "store_credential");
  StoreCredential c;
  c.principal = get_string(j, "principal");
  c.secret = get_string(j, "secret");
  return c;
}

nlohmann::json credential_to_json(const StoreCredential& cred) {
  return {{"principal", cred.principal}, {"secret", cred.secret}};
}

double authenticate_request(InvocationContext& ctx,
                            const std::shared_ptr<const auth::KeyDirectory>& keys,
                            const auth::ClientAuthPolicy& policy, double key_fetch_s,
                            const nlohmann::json& req) {
  const double t0 = ctx.elapsed();
  auto verifier = verifier_for(ctx.cache(), keys);
  std::optional<std::string> api_token;
  if (req.contains("api_token")) api_token = get_string(req, "api_token");
  const std::size_t fetches = verifier->key_fetches();
  const auto v = verifier->validate(
      get_string(req, "token"), policy, ctx.now(),
      api_token ? std::optional<std::string_view>(*api_token) : std::nullopt);
  ctx.sleep(key_fetch_s * static_cast<double>(verifier->key_fetches() - fetches));
  if (!v) {
    throw AuthRejected("token rejected: " + std::string(auth::reject_reason_name(*v.reason)));
  }
  return ctx.elapsed() - t0;
}

LoadedShard load_shard_cached(InvocationContext& ctx, const ShardRegistry& shards,
                              const std::string& shard_id) {
  const std::string key = "shard:" + shard_id;
  if (auto* hit = ctx.cache().get(key)) {
    if (auto* p = std::any_cast<std::shared_ptr<const Partition>>(hit)) return {*p, true};
  }
  const ShardFetch fetch = shards.fetch(shard_id);
  ctx.sleep(fetch.latency_s);
  ctx.transfer(fetch.bytes);
  ctx.cache().put(key, fetch.partition);
  return {fetch.partition, false};
}

}  // namespace faasfl
