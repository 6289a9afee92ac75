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

#include "faasfl/controller.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "faasfl/crypto.hpp"
#include "faasfl/error.hpp"
#include "faasfl/function_support.hpp"

namespace faasfl {

using nlohmann::json;

void SessionConfig::validate() const {
  model.validate();
  if (session_id.empty()) throw InvalidArgument("session id must not be empty");
  if (clients_per_round == 0 || total_clients == 0 || max_rounds == 0) {
    throw InvalidArgument("clients_per_round, total_clients and max_rounds must be positive");
  }
  if (clients_per_round > total_clients) {
    throw InvalidArgument("clients_per_round (" + std::to_string(clients_per_round) +
                          ") exceeds total_clients (" + std::to_string(total_clients) + ")");
  }
  if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) {
    throw InvalidArgument("target_accuracy must lie in [0, 1]");
  }
  if (!(client_timeout_s > 0.0)) throw InvalidArgument("client_timeout_s must be positive");
  if (aggregation_batch_size == 0) throw InvalidArgument("aggregation_batch_size must be positive");
  if (evaluation.mode == EvaluationConfig::Mode::kFederated &&
      (evaluation.eval_clients_per_round == 0 || evaluation.eval_clients_per_round > total_clients)) {
    throw InvalidArgument("eval_clients_per_round must lie in [1, total_clients]");
  }
  if (evaluation.mode == EvaluationConfig::Mode::kCentral && evaluation.central_shard.empty()) {
    throw InvalidArgument("central evaluation needs a shard id");
  }
  if (token_fetch_s < 0.0) throw InvalidArgument("token_fetch_s must be non-negative");
}

// --- registry ----------------------------------------------------------------

void ClientRegistry::add(ClientRecord record) {
  if (record.client_id.empty()) throw InvalidArgument("client id must not be empty");
  if (records_.contains(record.client_id)) {
    throw InvalidArgument("client '" + record.client_id + "' is already registered");
  }
  record.hyperparams.validate();
  order_.push_back(record.client_id);
  const std::string id = record.client_id;
  records_.emplace(id, std::move(record));
}

const ClientRecord& ClientRegistry::get(const std::string& client_id) const {
  auto it = records_.find(client_id);
  if (it == records_.end()) throw NotFound("unknown client '" + client_id + "'");
  return it->second;
}

ClientRecord& ClientRegistry::get(const std::string& client_id) {
  auto it = records_.find(client_id);
  if (it == records_.end()) throw NotFound("unknown client '" + client_id + "'");
  return it->second;
}

// --- pure helpers ------------------------------------------------------------

std::vector<std::string> select_clients(std::span<const std::string> ids, std::size_t k,
                                        std::uint64_t seed) {
  if (k > ids.size()) {
    throw InvalidArgument("cannot select " + std::to_string(k) + " of " +
                          std::to_string(ids.size()) + " clients");
  }
  std::vector<std::size_t> idx(ids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(ids[idx[i]]);
  return out;
}

std::uint64_t derive_seed(std::uint64_t session_seed, std::uint64_t round, std::string_view purpose) {
  return crypto::stable_hash64(std::to_string(session_seed) + "/" + std::to_string(round) + "/" +
                               std::string(purpose));
}

TestMetrics federated_eval_aggregate(std::span<const TestMetrics> metrics) {
  if (metrics.empty()) throw InvalidArgument("no evaluation metrics to aggregate");
  std::size_t total = 0;
  for (const auto& m : metrics) {
    if (m.test_cardinality == 0) throw InvalidArgument("evaluation metric with zero test cardinality");
    total += m.test_cardinality;
  }
  TestMetrics out;
  out.test_cardinality = total;
  for (const auto& m : metrics) {
    const double f = static_cast<double>(m.test_cardinality) / static_cast<double>(total);
    out.loss += f * m.loss;
    out.accuracy += f * m.accuracy;
  }
  return out;
}

// --- metrics log -------------------------------------------------------------

MetricsLog::MetricsLog(const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw IoError("cannot open metrics log " + path.string());
  out_.precision(17);
  if (fresh) out_ << kHeader << "\n" << std::flush;
}

void MetricsLog::append(const RoundReport& r) {
  const double nan = std::nan("");
  out_ << r.round << ',' << r.started_at << ','
       << (r.global_metrics ? r.global_metrics->accuracy : nan) << ','
       << (r.global_metrics ? r.global_metrics->loss : nan) << ',' << r.straggler_s << ','
       << r.aggregate_s << ',' << r.eval_s << ',' << r.total_s << ',' << r.finished.size() << ','
       << r.timed_out.size() << ',' << r.failed.size() << "\n"
       << std::flush;
  if (!out_) throw IoError("metrics log write failed");
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open metrics log " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != MetricsLog::kHeader) {
    throw InvalidArgument(path.string() + ": unexpected metrics header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) c.push_back(cell);
    if (c.size() != 11) throw InvalidArgument(path.string() + ": bad metrics row '" + line + "'");
    try {
      MetricsRow r;
      r.round = std::stoull(c[0]);
      r.timestamp = std::stod(c[1]);
      r.accuracy = std::stod(c[2]);
      r.loss = std::stod(c[3]);
      r.straggler_s = std::stod(c[4]);
      r.agg_s = std::stod(c[5]);
      r.eval_s = std::stod(c[6]);
      r.total_s = std::stod(c[7]);
      r.finished = std::stoull(c[8]);
      r.timed_out = std::stoull(c[9]);
      r.failed = std::stoull(c[10]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw InvalidArgument(path.string() + ": bad metrics row '" + line + "'");
    }
  }
  return rows;
}

// --- controller --------------------------------------------------------------

Controller::Controller(SessionConfig config, ClientRegistry registry, ControllerServices services)
    : config_(std::move(config)), registry_(std::move(registry)), services_(std::move(services)) {
  config_.validate();
  if (!services_.fabric || !services_.store || !services_.auth) {
    throw InvalidArgument("controller needs a fabric, a parameter store and an auth server");
  }
  if (registry_.size() < config_.total_clients) {
    throw InvalidArgument("registry holds " + std::to_string(registry_.size()) +
                          " clients but the session expects " +
                          std::to_string(config_.total_clients));
  }
  for (const auto& id : registry_.ids()) {
    const auto& fn = registry_.get(id).function_id;
    if (!services_.fabric->deployed(fn)) {
      throw NotFound("client '" + id + "' points at undeployed function '" + fn + "'");
    }
  }
  if (!services_.fabric->deployed(services_.aggregator_function)) {
    throw NotFound("aggregator function '" + services_.aggregator_function + "' is not deployed");
  }
}

double Controller::now() const {
  if (services_.clock) return services_.clock->now();
  return WallClock().now();
}

std::uint64_t Controller::initialize() {
  const auto& admin = services_.store->admin_credential();
  if (auto v = services_.store->latest_version(config_.session_id)) return *v;
  return services_.store->put_global_model(admin, config_.session_id,
                                           initialize_parameters(config_.model, config_.seed));
}

std::vector<Controller::Invocation> Controller::invoke_all(const std::vector<std::string>& clients,
                                                           const std::vector<json>& requests,
                                                           double at, std::uint64_t round) {
  std::vector<Invocation> out(clients.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < clients.size(); i = next.fetch_add(1)) {
      out[i].client_id = clients[i];
      try {
        out[i].result = services_.fabric->invoke(registry_.get(clients[i]).function_id, requests[i],
                                                 {at, static_cast<std::int64_t>(round)});
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
    }
  };
  // One worker per selected client, as the round's all-of wait implies.
  {
    std::vector<std::jthread> pool;
    const std::size_t n = std::min(clients.size(), config_.clients_per_round);
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  return out;
}

RoundReport Controller::run_round(std::uint64_t round) {
  auto& store = *services_.store;
  const auto& admin = store.admin_credential();
  const std::string& session = config_.session_id;

  RoundReport report;
  report.round = round;
  report.started_at = now();
  const double t0 = report.started_at;

  const auth::InvocationToken token = services_.auth->fetch_token(services_.server_credentials);
  report.token_s = config_.token_fetch_s;
  store.open_round(admin, session, round);

  const double cred_ttl = config_.client_timeout_s + 3600.0;
  std::vector<std::string> issued;
  auto base_request = [&](const StoreCredential& cred) {
    json req = {{"token", token.encoded},
                {"store_credential", credential_to_json(cred)},
                {"session", session},
                {"model", model_to_json(config_.model)}};
    if (config_.api_token) req["api_token"] = *config_.api_token;
    issued.push_back(cred.principal);
    return req;
  };

  // Training.
  report.selected = select_clients(std::span(registry_.ids()).first(config_.total_clients),
                                   config_.clients_per_round, derive_seed(config_.seed, round, "train"));
  std::vector<json> requests;
  for (const auto& id : report.selected) {
    const ClientRecord& rec = registry_.get(id);
    json req = base_request(store.issue_credential(admin, StoreScope::client(session, id), cred_ttl));
    req["action"] = "train";
    req["round"] = round;
    req["client_id"] = id;
    req["shard_id"] = rec.shard_id;
    req["hyperparams"] = hyperparams_to_json(rec.hyperparams);
    if (rec.straggle_s > 0.0) req["straggle_s"] = rec.straggle_s;
    requests.push_back(std::move(req));
  }
  const double t_clients = t0 + report.token_s;
  double wait = 0.0;
  for (const auto& inv : invoke_all(report.selected, requests, t_clients, round)) {
    if (!inv.result) {
      report.failed.push_back(inv.client_id);
      report.failure_reasons[inv.client_id] = inv.error;
      continue;
    }
    const InvocationRecord& rec = inv.result->record;
    if (rec.outcome == Outcome::kTimeout || rec.duration_s > config_.client_timeout_s) {
      report.timed_out.push_back(inv.client_id);
      wait = std::max(wait, config_.client_timeout_s);
    } else if (inv.result->ok() && inv.result->response->value("ok", false)) {
      report.finished.push_back(inv.client_id);
      report.straggler_s = std::max(report.straggler_s, rec.duration_s);
      wait = std::max(wait, rec.duration_s);
    } else {
      report.failed.push_back(inv.client_id);
      report.failure_reasons[inv.client_id] =
          inv.result->ok() ? inv.result->response->value("reason", std::string("rejected"))
                           : std::string(outcome_name(rec.outcome)) + ": " + inv.result->error;
      wait = std::max(wait, rec.duration_s);
    }
  }

  auto finish = [&](double elapsed) {
    report.total_s = elapsed;
    for (const auto& p : issued) store.revoke_credential(admin, p);
    if (services_.clock) services_.clock->set(t0 + report.total_s);
    return report;
  };

  if (report.finished.empty()) {
    report.error = "no client finished";
    return finish(report.token_s + wait);
  }

  // Aggregation over the finished clients only.
  const double t_agg = t_clients + wait;
  const StoreCredential agg_cred = store.issue_credential(admin, StoreScope::aggregator(session), cred_ttl);
  json agg_req = base_request(agg_cred);
  agg_req["action"] = "aggregate";
  agg_req["round"] = round;
  agg_req["batch_size"] = config_.aggregation_batch_size;
  agg_req["mode"] = aggregation_mode_name(config_.aggregation_mode);
  agg_req["accepted_clients"] = report.finished;
  const bool central = config_.evaluation.mode == EvaluationConfig::Mode::kCentral;
  if (central) agg_req["central_test"] = config_.evaluation.central_shard;

  InvocationResult agg;
  try {
    agg = services_.fabric->invoke(services_.aggregator_function, agg_req,
                                   {t_agg, static_cast<std::int64_t>(round)});
  } catch (const std::exception& e) {
    report.error = std::string("aggregator: ") + e.what();
    return finish(report.token_s + wait);
  }
  if (!agg.ok()) {
    report.aggregate_s = agg.record.duration_s;
    report.error = "aggregator " + std::string(outcome_name(agg.record.outcome)) + ": " + agg.error;
    return finish(report.token_s + wait + report.aggregate_s);
  }
  const json& resp = *agg.response;
  report.version = resp.at("version").get<std::uint64_t>();
  report.success = true;
  if (central) {
    report.eval_s = resp.at("timing").at("eval_s").get<double>();
    const json& m = resp.at("metrics");
    report.global_metrics = TestMetrics{m.at("loss").get<double>(), m.at("accuracy").get<double>(),
                                        m.at("test_cardinality").get<std::size_t>()};
  }
  report.aggregate_s = agg.record.duration_s - report.eval_s;

  if (!central) {
    const auto eval_clients = select_clients(std::span(registry_.ids()).first(config_.total_clients),
                                             config_.evaluation.eval_clients_per_round,
                                             derive_seed(config_.seed, round, "evaluate"));
    std::vector<json> eval_reqs;
    for (const auto& id : eval_clients) {
      json req = base_request(store.issue_credential(admin, StoreScope::client(session, id), cred_ttl));
      req["action"] = "evaluate";
      req["client_id"] = id;
      req["shard_id"] = registry_.get(id).shard_id;
      eval_reqs.push_back(std::move(req));
    }
    std::vector<TestMetrics> metrics;
    for (const auto& inv : invoke_all(eval_clients, eval_reqs, t_agg + agg.record.duration_s, round)) {
      if (!inv.result) continue;
      report.eval_s = std::max(report.eval_s, inv.result->record.duration_s);
      if (!inv.result->ok()) continue;
      const json& r = *inv.result->response;
      metrics.push_back({r.at("loss").get<double>(), r.at("accuracy").get<double>(),
                         r.at("test_cardinality").get<std::size_t>()});
    }
    if (!metrics.empty()) report.global_metrics = federated_eval_aggregate(metrics);
  }
  return finish(report.token_s + wait + agg.record.duration_s + (central ? 0.0 : report.eval_s));
}

std::vector<RoundReport> Controller::run_session(const std::optional<std::filesystem::path>& metrics_path) {
  std::optional<MetricsLog> log;
  if (metrics_path) log.emplace(*metrics_path);
  initialize();
  std::vector<RoundReport> reports;
  for (std::uint64_t round = 1; round <= config_.max_rounds; ++round) {
    reports.push_back(run_round(round));
    if (log) log->append(reports.back());
    const auto& r = reports.back();
    if (r.success && r.global_metrics && r.global_metrics->accuracy >= config_.target_accuracy) break;
  }
  return reports;
}

}  // namespace faasfl
