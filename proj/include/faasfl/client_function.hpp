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
#include <memory>
#include <optional>
#include <random>
#include <string>

#include <json.hpp>

#include "faasfl/auth.hpp"
#include "faasfl/data.hpp"
#include "faasfl/fabric.hpp"
#include "faasfl/model.hpp"
#include "faasfl/optimizer.hpp"
#include "faasfl/param_store.hpp"
#include "faasfl/shard_store.hpp"

namespace faasfl {

struct PrivacyConfig {
  double noise_multiplier = 1.0;  // z; 0 clips without noise
  double l2_clip_norm = 1.0;      // C
  std::size_t microbatches = 1;   // m, must divide the batch size
  std::uint64_t max_invocations = 100;

  void validate() const;
};

struct ClientHyperparameters {
  std::size_t local_epochs = 5;
  std::size_t batch_size = 10;
  OptimizerConfig optimizer = OptimizerConfig::adam();
  std::optional<PrivacyConfig> dp;

  void validate() const;
};

nlohmann::json model_to_json(const ModelSpec& model);
ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json hyperparams_to_json(const ClientHyperparameters& hp);
ClientHyperparameters hyperparams_from_json(const nlohmann::json& j);

// Reshuffle seed for one client in one round.
std::uint64_t round_shuffle_seed(std::string_view session, std::uint64_t round,
                                 std::string_view client_id);

double l2_norm(const ParameterSet& p);

// Rescales `grad` in place so its global L2 norm is at most `clip`.
void clip_to_norm(ParameterSet& grad, double clip);

// (sum_i clip(g_i, C) + N(0, (zC)^2 I)) / m, where g_i is the mean gradient of
// the i-th of m equal, consecutive microbatches.
ParameterSet dp_gradient(const ModelSpec& model, const ParameterSet& params, const Tensor& batch_x,
                         std::span<const int> labels, const PrivacyConfig& cfg,
                         std::mt19937_64& rng);

struct LocalTrainResult {
  ParameterSet params;
  std::size_t steps = 0;
  std::size_t examples = 0;       // examples consumed, for compute accounting
  bool batch_clamped = false;
  std::size_t dropped_batches = 0;  // DP only: tails m does not divide
};

// `local_epochs` passes over the data in a fresh seeded shuffle per epoch. The
// last batch of an epoch may be short. Optimizer state starts fresh.
LocalTrainResult local_train(const ModelSpec& model, ParameterSet params, const Dataset& data,
                             const ClientHyperparameters& hp, std::uint64_t seed);

BudgetDecision check_and_increment_budget(ParameterStore& store, const StoreCredential& cred,
                                          const std::string& client_id, const PrivacyConfig& cfg);

struct ClientFunctionEnv {
  std::shared_ptr<ParameterStore> store;
  std::shared_ptr<const ShardRegistry> shards;
  std::shared_ptr<const auth::KeyDirectory> keys;
  auth::ClientAuthPolicy policy;
  double key_fetch_s = 0.05;  // charged per verification-key fetch
};

// Handles {"action": "train" | "evaluate", ...}.
Handler make_client_handler(ClientFunctionEnv env);

}  // namespace faasfl
