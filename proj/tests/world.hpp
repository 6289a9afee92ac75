// A minimal deployment of store, auth and fabric for handler-level tests.
#pragma once

#include <memory>
#include <string>

#include "faasfl/aggregator.hpp"
#include "faasfl/auth.hpp"
#include "faasfl/client_function.hpp"
#include "faasfl/fabric.hpp"
#include "faasfl/function_support.hpp"
#include "faasfl/param_store.hpp"
#include "faasfl/shard_store.hpp"

namespace faasfl::test {

struct World {
  std::shared_ptr<SimClock> clock = std::make_shared<SimClock>(0.0);
  std::shared_ptr<auth::KeyDirectory> keys = std::make_shared<auth::KeyDirectory>();
  std::shared_ptr<auth::AuthServer> auth =
      std::make_shared<auth::AuthServer>("test-issuer", keys, clock, 900.0, 1);
  std::shared_ptr<ParameterStore> store;
  std::shared_ptr<ShardRegistry> shards = std::make_shared<ShardRegistry>();
  std::shared_ptr<Fabric> fabric;
  auth::ServerCredentials creds{"controller", "pw"};
  ModelSpec model;
  std::string session = "s";

  explicit World(ModelSpec m, StoreOptions opts = {}, FabricOptions fopts = {})
      : store(std::make_shared<ParameterStore>(opts, clock)),
        fabric(std::make_shared<Fabric>(fopts, clock)),
        model(std::move(m)) {
    auth->register_server(creds, {std::string(auth::kScopeInvokeClients),
                                  std::string(auth::kScopeInvokeAggregator),
                                  std::string(auth::kScopeEvaluate)});
  }

  const StoreCredential& admin() const { return store->admin_credential(); }

  auth::ClientAuthPolicy policy(std::string_view scope) const {
    return {"test-issuer", {std::string(scope)}, std::nullopt};
  }

  void deploy_client(const std::string& fid, double cold = 0.0, std::size_t memory_mb = 2048) {
    FunctionDeployment d;
    d.function_id = fid;
    d.memory_limit_mb = static_cast<std::uint32_t>(memory_mb);
    d.cold_start = ColdStartProfile{ColdStartProfile::Kind::kConstant, cold, 0.0};
    fabric->deploy(d, make_client_handler({store, shards, keys, policy(auth::kScopeInvokeClients), 0.05}));
  }

  void deploy_aggregator(const std::string& fid = "aggregator", std::size_t memory_mb = 4096) {
    FunctionDeployment d;
    d.function_id = fid;
    d.memory_limit_mb = static_cast<std::uint32_t>(memory_mb);
    d.role = "aggregator";
    d.cold_start = ColdStartProfile{ColdStartProfile::Kind::kConstant, 0.0, 0.0};
    fabric->deploy(d, make_aggregator_handler(
                          {store, shards, keys, policy(auth::kScopeInvokeAggregator), 0.05}));
  }

  std::string token() { return auth->fetch_token(creds).encoded; }

  StoreCredential client_cred(const std::string& client) {
    return store->issue_credential(admin(), StoreScope::client(session, client), 3600);
  }

  nlohmann::json train_request(const std::string& client, const std::string& shard,
                               std::uint64_t round, const ClientHyperparameters& hp) {
    return {{"action", "train"},
            {"token", token()},
            {"store_credential", credential_to_json(client_cred(client))},
            {"session", session},
            {"round", round},
            {"client_id", client},
            {"shard_id", shard},
            {"model", model_to_json(model)},
            {"hyperparams", hyperparams_to_json(hp)}};
  }

  nlohmann::json evaluate_request(const std::string& client, const std::string& shard) {
    return {{"action", "evaluate"},
            {"token", token()},
            {"store_credential", credential_to_json(client_cred(client))},
            {"session", session},
            {"client_id", client},
            {"shard_id", shard},
            {"model", model_to_json(model)}};
  }

  nlohmann::json aggregate_request(std::uint64_t round, std::size_t batch,
                                   std::string mode = "running") {
    const auto cred = store->issue_credential(admin(), StoreScope::aggregator(session), 3600);
    return {{"action", "aggregate"},
            {"token", token()},
            {"store_credential", credential_to_json(cred)},
            {"session", session},
            {"round", round},
            {"batch_size", batch},
            {"mode", mode},
            {"model", model_to_json(model)}};
  }
};

}  // namespace faasfl::test
