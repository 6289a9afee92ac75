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

// TOML loaders for the session, fabric and price files. Unknown keys are
// errors so a typo never silently falls back to a default.

#pragma once

#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

#include "faasfl/client_function.hpp"
#include "faasfl/controller.hpp"
#include "faasfl/cost.hpp"
#include "faasfl/data.hpp"
#include "faasfl/shard_store.hpp"
#include "faasfl/system.hpp"

namespace faasfl {

PartitionStrategy parse_partition_strategy(std::string_view name);

struct DataConfig {
  enum class Source { kSynthetic, kDirectory };
  Source source = Source::kSynthetic;
  std::filesystem::path shards_dir;  // directory source
  GaussianClusterSpec synthetic;
  std::size_t train_size = 60000;
  std::size_t test_size = 10000;
  PartitionStrategy strategy = PartitionStrategy::kSortedLabelShards;
  std::size_t shards = 0;             // 0 means one per client
  double user_size_sigma = 0.5;       // per-user strategy
  double client_test_fraction = 0.0;  // > 0 gives every shard a local test split
  double fetch_latency_s = 0.0;
  std::uint64_t seed = 0;
};

struct SessionFile {
  SessionConfig session;
  ClientHyperparameters hyperparams;
  DataConfig data;
};

SessionFile load_session_file(const std::filesystem::path& path);
FabricConfig load_fabric_config(const std::filesystem::path& path);

struct PriceFile {
  CostModel model;
  std::vector<double> target_accuracies;
  std::vector<double> multipliers = kDefaultMultipliers;
};

PriceFile load_price_file(const std::filesystem::path& path);

// Client partitions plus, for central evaluation, the central test shard.
std::vector<Partition> make_partitions(const DataConfig& data, const SessionConfig& session);
std::shared_ptr<ShardRegistry> build_shards(const DataConfig& data, const SessionConfig& session);

}  // namespace faasfl
