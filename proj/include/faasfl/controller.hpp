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
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faasfl/aggregator.hpp"
#include "faasfl/auth.hpp"
#include "faasfl/client_function.hpp"
#include "faasfl/clock.hpp"
#include "faasfl/fabric.hpp"
#include "faasfl/model.hpp"
#include "faasfl/param_store.hpp"

namespace faasfl {

struct EvaluationConfig {
  enum class Mode { kCentral, kFederated };
  Mode mode = Mode::kCentral;
  std::string central_shard = "central-test";
  std::size_t eval_clients_per_round = 10;
};

struct SessionConfig {
  std::string session_id = "session";
  ModelSpec model = ModelSpec::logistic_regression(32, 10);
  std::size_t clients_per_round = 25;
  std::size_t total_clients = 200;
  std::size_t max_rounds = 50;
  double target_accuracy = 0.9;
  double client_timeout_s = 300.0;
  std::size_t aggregation_batch_size = 20;
  AggregationMode aggregation_mode = AggregationMode::kRunning;
  EvaluationConfig evaluation;
  std::uint64_t seed = 0;
  std::optional<std::string> api_token;  // forwarded to clients that demand one
  double token_fetch_s = 0.05;           // controller-side cost of one token fetch

  void validate() const;
};

struct ClientRecord {
  std::string client_id;
  std::string function_id;
  std::string shard_id;
  ClientHyperparameters hyperparams;
  std::string platform_label = "default";
  double registered_at = 0.0;
  double straggle_s = 0.0;  // injected delay per training invocation
};

class ClientRegistry {
 public:
  void add(ClientRecord record);
  const ClientRecord& get(const std::string& client_id) const;
  ClientRecord& get(const std::string& client_id);
  bool contains(const std::string& client_id) const { return records_.contains(client_id); }
  std::size_t size() const noexcept { return order_.size(); }
  // Registration order.
  const std::vector<std::string>& ids() const noexcept { return order_; }

 private:
  std::map<std::string, ClientRecord> records_;
  std::vector<std::string> order_;
};

// Uniform sample of k ids without replacement (partial Fisher-Yates).
std::vector<std::string> select_clients(std::span<const std::string> ids, std::size_t k,
                                        std::uint64_t seed);

// Independent stream per (round, purpose) derived from the session seed.
std::uint64_t derive_seed(std::uint64_t session_seed, std::uint64_t round, std::string_view purpose);

// Cardinality-weighted mean of loss and accuracy.
TestMetrics federated_eval_aggregate(std::span<const TestMetrics> metrics);

struct RoundReport {
  std::uint64_t round = 0;
  double started_at = 0.0;
  std::vector<std::string> selected;
  std::vector<std::string> finished;
  std::vector<std::string> timed_out;
  std::vector<std::string> failed;
  std::map<std::string, std::string> failure_reasons;
  double token_s = 0.0;
  double straggler_s = 0.0;  // slowest finished client
  double aggregate_s = 0.0;
  double eval_s = 0.0;
  double total_s = 0.0;
  std::optional<TestMetrics> global_metrics;
  bool success = false;
  std::optional<std::uint64_t> version;
  std::string error;
};

/// Append-only CSV, one row per round, flushed as written.
class MetricsLog {
 public:
  explicit MetricsLog(const std::filesystem::path& path);
  void append(const RoundReport& report);

  static constexpr const char* kHeader =
      "round,timestamp,accuracy,loss,straggler_s,agg_s,eval_s,total_s,finished,timed_out,failed";

 private:
  std::ofstream out_;
};

struct MetricsRow {
  std::uint64_t round = 0;
  double timestamp = 0.0;
  double accuracy = 0.0;
  double loss = 0.0;
  double straggler_s = 0.0;
  double agg_s = 0.0;
  double eval_s = 0.0;
  double total_s = 0.0;
  std::size_t finished = 0;
  std::size_t timed_out = 0;
  std::size_t failed = 0;
};

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct ControllerServices {
  std::shared_ptr<Fabric> fabric;
  std::shared_ptr<ParameterStore> store;
  std::shared_ptr<auth::AuthServer> auth;
  auth::ServerCredentials server_credentials;
  // Virtual time; advanced by each round's total. Null means wall-clock.
  std::shared_ptr<SimClock> clock;
  std::string aggregator_function = "aggregator";
};

/// Drives rounds: token, client selection and concurrent invocation with a
/// per-client deadline, aggregation over the finished clients, evaluation.
class Controller {
 public:
  Controller(SessionConfig config, ClientRegistry registry, ControllerServices services);

  // Seeded initial model committed as version 0 unless a model exists.
  std::uint64_t initialize();

  RoundReport run_round(std::uint64_t round);

  // Rounds until the target accuracy or max_rounds. Each report is written to
  // the metrics log before the next round starts.
  std::vector<RoundReport> run_session(const std::optional<std::filesystem::path>& metrics_path = {});

  const SessionConfig& config() const noexcept { return config_; }
  ClientRegistry& registry() noexcept { return registry_; }
  const ClientRegistry& registry() const noexcept { return registry_; }

 private:
  struct Invocation {
    std::string client_id;
    std::optional<InvocationResult> result;
    std::string error;  // invoke itself failed
  };

  std::vector<Invocation> invoke_all(const std::vector<std::string>& clients,
                                     const std::vector<nlohmann::json>& requests, double at,
                                     std::uint64_t round);
  double now() const;

  SessionConfig config_;
  ClientRegistry registry_;
  ControllerServices services_;
};

}  // namespace faasfl
