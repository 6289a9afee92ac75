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

#include "faasfl/system.hpp"

#include <cstdio>

#include "faasfl/aggregator.hpp"
#include "faasfl/client_function.hpp"
#include "faasfl/crypto.hpp"
#include "faasfl/error.hpp"

namespace faasfl {

FabricConfig::FabricConfig() {
  aggregator.function_id = "aggregator";
  aggregator.memory_limit_mb = 4096;
  aggregator.role = "aggregator";
}

std::string FederatedSystem::client_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "client-%05zu", index);
  return buf;
}

FederatedSystem::FederatedSystem(SessionConfig session, FabricConfig fabric_cfg,
                                 ClientHyperparameters hyperparams,
                                 std::shared_ptr<ShardRegistry> shards, StoreOptions store_options,
                                 std::uint64_t auth_seed)
    : clock_(std::make_shared<SimClock>()),
      keys_(std::make_shared<auth::KeyDirectory>()),
      shards_(std::move(shards)) {
  session.validate();
  hyperparams.validate();
  if (!shards_) throw InvalidArgument("a shard registry is required");

  auth_ = std::make_shared<auth::AuthServer>("faasfl-auth", keys_, clock_, auth::kDefaultTokenTtl,
                                             auth_seed);
  const auth::ServerCredentials server{
      "controller", crypto::to_hex(crypto::sha256("controller/" + std::to_string(auth_seed)))};
  auth_->register_server(server, {std::string(auth::kScopeInvokeClients),
                                  std::string(auth::kScopeInvokeAggregator),
                                  std::string(auth::kScopeEvaluate)});
  store_ = std::make_shared<ParameterStore>(std::move(store_options), clock_);
  fabric_ = std::make_shared<Fabric>(fabric_cfg.options, clock_);
  for (const auto& p : fabric_cfg.platforms) fabric_->add_platform(p);

  std::vector<std::string> client_shards;
  for (const auto& id : shards_->list_shards()) {
    if (session.evaluation.mode == EvaluationConfig::Mode::kCentral &&
        id == session.evaluation.central_shard) {
      continue;
    }
    client_shards.push_back(id);
  }
  if (client_shards.size() < session.total_clients) {
    throw InvalidArgument("session needs " + std::to_string(session.total_clients) +
                          " client shards but only " + std::to_string(client_shards.size()) +
                          " are registered");
  }
  if (session.evaluation.mode == EvaluationConfig::Mode::kCentral &&
      !shards_->contains(session.evaluation.central_shard)) {
    throw NotFound("central test shard '" + session.evaluation.central_shard + "' is not registered");
  }

  auth::ClientAuthPolicy client_policy{auth_->issuer(), {std::string(auth::kScopeInvokeClients)},
                                       session.api_token};
  const Handler client_handler =
      make_client_handler({store_, shards_, keys_, client_policy, fabric_cfg.key_fetch_s});

  ClientRegistry registry;
  for (std::size_t i = 0; i < session.total_clients; ++i) {
    ClientRecord rec;
    rec.client_id = client_id(i);
    rec.function_id = "fn-" + rec.client_id;
    rec.shard_id = client_shards[i];
    rec.hyperparams = hyperparams;
    rec.platform_label = fabric_cfg.client.platform_label;
    rec.registered_at = clock_->now();
    FunctionDeployment dep = fabric_cfg.client;
    dep.function_id = rec.function_id;
    dep.role = "client";
    dep.seed = crypto::stable_hash64("cold-start/" + std::to_string(auth_seed) + "/" + rec.client_id);
    fabric_->deploy(dep, client_handler);
    registry.add(std::move(rec));
  }

  FunctionDeployment agg = fabric_cfg.aggregator;
  agg.role = "aggregator";
  if (agg.function_id.empty()) agg.function_id = "aggregator";
  auth::ClientAuthPolicy agg_policy{auth_->issuer(), {std::string(auth::kScopeInvokeAggregator)},
                                    session.api_token};
  fabric_->deploy(agg, make_aggregator_handler({store_, shards_, keys_, agg_policy, fabric_cfg.key_fetch_s}));

  ControllerServices services{fabric_, store_, auth_, server, clock_, agg.function_id};
  controller_ = std::make_unique<Controller>(std::move(session), std::move(registry), std::move(services));
}

}  // namespace faasfl
