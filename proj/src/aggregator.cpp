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

#include "faasfl/aggregator.hpp"

#include <limits>
#include <set>

#include "faasfl/client_function.hpp"
#include "faasfl/error.hpp"
#include "faasfl/function_support.hpp"
#include "faasfl/json_schema.hpp"
#include "faasfl/model.hpp"
#include "faasfl/serialize.hpp"

namespace faasfl {

ParameterSet fedavg_naive(std::span<const ClientResult> results) {
  if (results.empty()) throw InvalidArgument("cannot aggregate zero results");
  const ParameterSet& first = results.front().params;
  std::uint64_t total = 0;
  for (const auto& r : results) {
    first.require_shape_compatible(r.params, "result of client '" + r.client_id + "'");
    if (r.cardinality == 0) {
      throw InvalidArgument("result of client '" + r.client_id + "' has zero cardinality");
    }
    total += r.cardinality;
  }
  // Offsets from the first result: identical inputs come back unchanged.
  ParameterSet out = first;
  const double n_total = static_cast<double>(total);
  for (std::size_t k = 1; k < results.size(); ++k) {
    const double f = static_cast<double>(results[k].cardinality) / n_total;
    for (std::size_t t = 0; t < out.size(); ++t) {
      auto acc = out.tensor(t).data();
      const auto w = results[k].params.tensor(t).data();
      const auto w0 = first.tensor(t).data();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f * (w[i] - w0[i]);
    }
  }
  return out;
}

void RunningAverage::add(const ParameterSet& params, std::uint64_t weight,
                         std::string_view client_id) {
  if (weight == 0) {
    throw InvalidArgument("result of client '" + std::string(client_id) + "' has zero cardinality");
  }
  if (!acc_) {
    acc_ = params;
  } else {
    acc_->require_shape_compatible(params, "result of client '" + std::string(client_id) + "'");
    const double w_total = static_cast<double>(total_ + weight);
    const double take = static_cast<double>(weight) / w_total;
    for (std::size_t t = 0; t < acc_->size(); ++t) {
      auto acc = acc_->tensor(t).data();
      const auto w = params.tensor(t).data();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += take * (w[i] - acc[i]);
    }
  }
  total_ += weight;
  ++seen_;
}

const ParameterSet& RunningAverage::value() const {
  if (!acc_) throw FailedPrecondition("running average is empty");
  return *acc_;
}

ParameterSet RunningAverage::take() {
  if (!acc_) throw FailedPrecondition("running average is empty");
  ParameterSet out = std::move(*acc_);
  acc_.reset();
  return out;
}

RunningAggregate fedavg_running(const BatchSource& next, ResidencyGauge* gauge) {
  RunningAverage avg;
  GaugeLease accumulator;
  while (auto batch = next()) {
    for (const auto& r : batch->results) {
      avg.add(r.params, r.cardinality, r.client_id);
      if (avg.results_seen() == 1) accumulator = GaugeLease(gauge, 1);
    }
  }
  if (avg.empty()) throw InvalidArgument("cannot aggregate zero results");
  RunningAggregate out;
  out.total_weight = avg.total_weight();
  out.results = avg.results_seen();
  out.params = avg.take();
  return out;
}

std::string_view aggregation_mode_name(AggregationMode mode) {
  return mode == AggregationMode::kNaive ? "naive" : "running";
}

AggregationMode parse_aggregation_mode(std::string_view name) {
  if (name == "running") return AggregationMode::kRunning;
  if (name == "naive") return AggregationMode::kNaive;
  throw InvalidArgument("unknown aggregation mode '" + std::string(name) + "'");
}

namespace {

using nlohmann::json;

json handle_aggregate(InvocationContext& ctx, const AggregatorEnv& env, const json& req) {
  check_fields(req,
               {{"action", JsonType::kString},
                {"token", JsonType::kString},
                {"api_token", JsonType::kString, false},
                {"store_credential", JsonType::kObject},
                {"session", JsonType::kString},
                {"round", JsonType::kUnsigned},
                {"batch_size", JsonType::kUnsigned},
                {"mode", JsonType::kString, false},
                {"accepted_clients", JsonType::kArray, false},
                {"central_test", JsonType::kString, false},
                {"model", JsonType::kObject}},
               "aggregate request");
  const StoreCredential cred = credential_from_json(req.at("store_credential"));
  const std::string session = get_string(req, "session");
  const std::uint64_t round = get_unsigned(req, "round");
  const std::size_t batch_size = get_unsigned(req, "batch_size");
  if (batch_size == 0) throw InvalidRequest("aggregate request: batch_size must be at least 1");
  const AggregationMode mode =
      req.contains("mode") ? parse_aggregation_mode(get_string(req, "mode")) : AggregationMode::kRunning;
  std::optional<std::set<std::string>> accepted;
  if (req.contains("accepted_clients")) {
    accepted.emplace();
    for (const auto& c : req.at("accepted_clients")) {
      if (!c.is_string()) throw InvalidRequest("aggregate request: accepted_clients must hold strings");
      accepted->insert(c.get<std::string>());
    }
  }
  const ModelSpec model = model_from_json(req.at("model"));

  const double auth_s = authenticate_request(ctx, env.keys, env.policy, env.key_fetch_s, req);

  double download_s = 0.0;
  double aggregate_s = 0.0;
  auto& gauge = env.store->gauge();
  gauge.reset_peak();
  const std::size_t resident_before = gauge.current();

  const std::size_t stream_batch =
      mode == AggregationMode::kNaive ? std::numeric_limits<std::size_t>::max() : batch_size;
  auto stream = env.store->stream_round_results(cred, session, round, stream_batch, accepted);
  if (stream.total() == 0) {
    throw FailedPrecondition("round " + std::to_string(round) + " has no results to aggregate");
  }

  // Every materialized result is charged against the function's memory limit.
  std::vector<MemoryTracker::Lease> batch_leases;
  MemoryTracker::Lease accumulator_lease;
  bool accumulator_lease_empty = true;
  auto account_batch = [&](const ResultBatch& batch) {
    const double t = ctx.elapsed();
    for (std::size_t i = 0; i < batch.results.size(); ++i) {
      ctx.transfer(batch.encoded_bytes[i]);
      batch_leases.push_back(ctx.memory().allocate(
          batch.results[i].params.flat_size() * sizeof(double), "client result"));
    }
    download_s += ctx.elapsed() - t;
  };

  RunningAggregate agg;
  if (mode == AggregationMode::kNaive) {
    auto batch = stream.next();
    account_batch(*batch);
    const double t = ctx.elapsed();
    accumulator_lease = ctx.memory().allocate(
        batch->results.front().params.flat_size() * sizeof(double), "aggregate");
    agg.params = fedavg_naive(batch->results);
    agg.results = batch->results.size();
    for (const auto& r : batch->results) agg.total_weight += r.cardinality;
    ctx.compute(2.0 * static_cast<double>(agg.params.flat_size() * agg.results));
    aggregate_s += ctx.elapsed() - t;
  } else {
    BatchSource source = [&]() -> std::optional<ResultBatch> {
      batch_leases.clear();
      auto batch = stream.next();
      if (!batch) return batch;
      account_batch(*batch);
      const double t = ctx.elapsed();
      const std::size_t flat = batch->results.front().params.flat_size();
      if (accumulator_lease_empty) {
        accumulator_lease = ctx.memory().allocate(flat * sizeof(double), "accumulator");
        accumulator_lease_empty = false;
      }
      ctx.compute(3.0 * static_cast<double>(flat * batch->results.size()));
      aggregate_s += ctx.elapsed() - t;
      return batch;
    };
    agg = fedavg_running(source, &gauge);
  }
  batch_leases.clear();
  const std::size_t peak_resident = gauge.peak() - resident_before;

  double t = ctx.elapsed();
  const std::uint64_t version = env.store->put_global_model(cred, session, agg.params);
  const std::size_t bytes = encoded_size(agg.params);
  ctx.transfer(bytes);
  ctx.add_egress(bytes);
  const double upload_s = ctx.elapsed() - t;

  json response = {{"ok", true},
                   {"version", version},
                   {"results", agg.results},
                   {"total_weight", agg.total_weight},
                   {"peak_resident", peak_resident}};
  double eval_s = 0.0;
  if (req.contains("central_test")) {
    t = ctx.elapsed();
    const LoadedShard shard = load_shard_cached(ctx, *env.shards, get_string(req, "central_test"));
    const Dataset& test = shard.partition->test ? *shard.partition->test : shard.partition->train;
    const Metrics m = evaluate(model, agg.params, test.features(), test.labels());
    ctx.compute(2.0 * static_cast<double>(parameter_count(model) * test.size()));
    eval_s = ctx.elapsed() - t;
    response["metrics"] = {{"loss", m.loss}, {"accuracy", m.accuracy}, {"test_cardinality", m.count}};
  }
  response["timing"] = {{"auth_s", auth_s},
                        {"download_s", download_s},
                        {"aggregate_s", aggregate_s},
                        {"upload_s", upload_s},
                        {"eval_s", eval_s}};
  return response;
}

}  // namespace

Handler make_aggregator_handler(AggregatorEnv env) {
  if (!env.store || !env.shards || !env.keys) {
    throw InvalidArgument("aggregator needs a store, a shard registry and a key directory");
  }
  auto shared = std::make_shared<const AggregatorEnv>(std::move(env));
  return [shared](InvocationContext& ctx, const json& req) -> json {
    if (!req.is_object() || !req.contains("action") || req.at("action") != "aggregate") {
      throw InvalidRequest("aggregator expects action 'aggregate'");
    }
    return handle_aggregate(ctx, *shared, req);
  };
}

}  // namespace faasfl
