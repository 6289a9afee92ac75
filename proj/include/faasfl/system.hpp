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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faasfl/auth.hpp"
#include "faasfl/controller.hpp"
#include "faasfl/fabric.hpp"
#include "faasfl/param_store.hpp"
#include "faasfl/shard_store.hpp"

namespace faasfl {

struct FabricConfig {
  FabricOptions options;
  std::vector<PlatformProfile> platforms;  // "default" exists unless overridden
  FunctionDeployment client;               // template; id and seed are filled per client
  FunctionDeployment aggregator;
  double key_fetch_s = 0.05;

  FabricConfig();
};

/// One deployment of everything on a shared virtual clock: auth server, key
/// directory, parameter store, fabric with one client function per shard plus
/// the aggregator, and the controller driving them.
class FederatedSystem {
 public:
  FederatedSystem(SessionConfig session, FabricConfig fabric, ClientHyperparameters hyperparams,
                  std::shared_ptr<ShardRegistry> shards, StoreOptions store_options = {},
                  std::uint64_t auth_seed = 0);

  static std::string client_id(std::size_t index);

  Controller& controller() noexcept { return *controller_; }
  Fabric& fabric() noexcept { return *fabric_; }
  ParameterStore& store() noexcept { return *store_; }
  ShardRegistry& shards() noexcept { return *shards_; }
  SimClock& clock() noexcept { return *clock_; }
  auth::AuthServer& auth_server() noexcept { return *auth_; }
  const std::shared_ptr<auth::KeyDirectory>& keys() const noexcept { return keys_; }
  const std::shared_ptr<ParameterStore>& store_ptr() const noexcept { return store_; }

  std::vector<RoundReport> run(const std::optional<std::filesystem::path>& metrics_path = {}) {
    return controller_->run_session(metrics_path);
  }

 private:
  std::shared_ptr<SimClock> clock_;
  std::shared_ptr<auth::KeyDirectory> keys_;
  std::shared_ptr<auth::AuthServer> auth_;
  std::shared_ptr<ParameterStore> store_;
  std::shared_ptr<ShardRegistry> shards_;
  std::shared_ptr<Fabric> fabric_;
  std::unique_ptr<Controller> controller_;
};

}  // namespace faasfl
