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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>

#include "faasfl/auth.hpp"
#include "faasfl/fabric.hpp"
#include "faasfl/param_store.hpp"
#include "faasfl/shard_store.hpp"

namespace faasfl {

// sum_k (n_k / N) w_k over all results at once.
ParameterSet fedavg_naive(std::span<const ClientResult> results);

/// Weighted mean maintained one result at a time:
///   acc <- acc * W/(W+n) + w * n/(W+n),  W <- W + n.
class RunningAverage {
 public:
  void add(const ParameterSet& params, std::uint64_t weight, std::string_view client_id);

  bool empty() const noexcept { return !acc_.has_value(); }
  const ParameterSet& value() const;
  ParameterSet take();
  std::uint64_t total_weight() const noexcept { return total_; }
  std::size_t results_seen() const noexcept { return seen_; }

 private:
  std::optional<ParameterSet> acc_;
  std::uint64_t total_ = 0;
  std::size_t seen_ = 0;
};

using BatchSource = std::function<std::optional<ResultBatch>()>;

struct RunningAggregate {
  ParameterSet params;
  std::uint64_t total_weight = 0;
  std::size_t results = 0;
};

// Pulls batches until the source is dry. The accumulator holds one slot of
// `gauge` (when given) from the first result on.
RunningAggregate fedavg_running(const BatchSource& next, ResidencyGauge* gauge = nullptr);

enum class AggregationMode { kRunning, kNaive };

std::string_view aggregation_mode_name(AggregationMode mode);
AggregationMode parse_aggregation_mode(std::string_view name);

struct AggregatorEnv {
  std::shared_ptr<ParameterStore> store;
  std::shared_ptr<const ShardRegistry> shards;  // central test sets
  std::shared_ptr<const auth::KeyDirectory> keys;
  auth::ClientAuthPolicy policy;
  double key_fetch_s = 0.05;
};

// Handles {"action": "aggregate", ...}: streams the round's results, commits
// the new global model and optionally evaluates it on a central test shard.
Handler make_aggregator_handler(AggregatorEnv env);

}  // namespace faasfl
