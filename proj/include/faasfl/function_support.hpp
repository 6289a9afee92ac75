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

// Pieces shared by the client and aggregator handlers.

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "faasfl/auth.hpp"
#include "faasfl/fabric.hpp"
#include "faasfl/param_store.hpp"
#include "faasfl/shard_store.hpp"

namespace faasfl {

StoreCredential credential_from_json(const nlohmann::json& j);
nlohmann::json credential_to_json(const StoreCredential& cred);

// Checks req["token"] (and req["api_token"] when present) with a verifier kept
// in the instance cache, charging `key_fetch_s` per key fetch. Throws
// AuthRejected on failure. Returns the time spent.
double authenticate_request(InvocationContext& ctx,
                            const std::shared_ptr<const auth::KeyDirectory>& keys,
                            const auth::ClientAuthPolicy& policy, double key_fetch_s,
                            const nlohmann::json& req);

struct LoadedShard {
  std::shared_ptr<const Partition> partition;
  bool cached = false;
};

// Serves from the instance cache, else fetches and charges latency + transfer.
LoadedShard load_shard_cached(InvocationContext& ctx, const ShardRegistry& shards,
                              const std::string& shard_id);

}  // namespace faasfl
