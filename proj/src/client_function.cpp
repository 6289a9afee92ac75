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

#include "faasfl/client_function.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faasfl/crypto.hpp"
#include "faasfl/error.hpp"
#include "faasfl/function_support.hpp"
#include "faasfl/json_schema.hpp"
#include "faasfl/serialize.hpp"

namespace faasfl {
namespace {

using nlohmann::json;

constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.dim(1);
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.data().subspan(rows[i] * d, d);
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return Tensor({rows.size(), d}, std::move(out));
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  const std::size_t d = x.dim(1);
  const auto src = x.data().subspan(begin * d, count * d);
  return Tensor({count, d}, std::vector<double>(src.begin(), src.end()));
}

void add_into(ParameterSet& acc, const ParameterSet& g) {
  for (std::size_t t = 0; t < acc.size(); ++t) {
    auto a = acc.tensor(t).data();
    const auto b = g.tensor(t).data();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  }
}

json handle_train(InvocationContext& ctx, const ClientFunctionEnv& env, const json& req) {
  check_fields(req,
               {{"action", JsonType::kString},
                {"token", JsonType::kString},
                {"api_token", JsonType::kString, false},
                {"store_credential", JsonType::kObject},
                {"session", JsonType::kString},
                {"round", JsonType::kUnsigned},
                {"client_id", JsonType::kString},
                {"shard_id", JsonType::kString},
                {"model", JsonType::kObject},
                {"hyperparams", JsonType::kObject},
                {"straggle_s", JsonType::kNumber, false}},
               "train request");
  const StoreCredential cred = credential_from_json(req.at("store_credential"));
  const ModelSpec model = model_from_json(req.at("model"));
  const ClientHyperparameters hp = hyperparams_from_json(req.at("hyperparams"));
  const std::string session = get_string(req, "session");
  const std::uint64_t round = get_unsigned(req, "round");
  const std::string client_id = get_string(req, "client_id");
  const double straggle = req.contains("straggle_s") ? get_number(req, "straggle_s") : 0.0;
  if (straggle < 0.0) throw InvalidRequest("train request: straggle_s must be non-negative");

  const double auth_s = authenticate_request(ctx, env.keys, env.policy, env.key_fetch_s, req);

  if (hp.dp) {
    const auto decision = check_and_increment_budget(*env.store, cred, client_id, *hp.dp);
    if (!decision.allowed) {
      return {{"ok", false}, {"reason", "budget_exhausted"}, {"count", decision.count}};
    }
  }

  double t = ctx.elapsed();
  GlobalModel global = env.store->get_global_model(cred, session);
  ctx.transfer(global.bytes);
  auto model_lease = ctx.memory().allocate(3 * global.params.flat_size() * sizeof(double), "model");
  const LoadedShard shard = load_shard_cached(ctx, *env.shards, get_string(req, "shard_id"));
  auto data_lease = ctx.memory().allocate(shard.partition->train.byte_size(), "dataset");
  const double download_s = ctx.elapsed() - t;

  t = ctx.elapsed();
  ctx.sleep(straggle);
  LocalTrainResult trained = local_train(model, std::move(global.params), shard.partition->train, hp,
                                         round_shuffle_seed(session, round, client_id));
  ctx.compute(training_flops(model, trained.examples));
  const double train_s = ctx.elapsed() - t;

  t = ctx.elapsed();
  ClientResult result;
  result.session_id = session;
  result.round = round;
  result.client_id = client_id;
  result.params = std::move(trained.params);
  result.cardinality = shard.partition->cardinality();
  const std::size_t bytes = encoded_size(result.params);
  env.store->put_client_result(cred, result);
  ctx.transfer(bytes);
  ctx.add_egress(bytes);
  const double upload_s = ctx.elapsed() - t;

  json warnings = json::array();
  if (trained.batch_clamped) warnings.push_back("batch_size clamped to the shard cardinality");
  if (trained.dropped_batches > 0) {
    warnings.push_back(std::to_string(trained.dropped_batches) +
                       " short batches skipped (not divisible into microbatches)");
  }
  return {{"ok", true},
          {"cardinality", result.cardinality},
          {"steps", trained.steps},
          {"dataset_cached", shard.cached},
          {"timing",
           {{"auth_s", auth_s}, {"download_s", download_s}, {"train_s", train_s}, {"upload_s", upload_s}}},
          {"warnings", std::move(warnings)}};
}

json handle_evaluate(InvocationContext& ctx, const ClientFunctionEnv& env, const json& req) {
  check_fields(req,
               {{"action", JsonType::kString},
                {"token", JsonType::kString},
                {"api_token", JsonType::kString, false},
                {"store_credential", JsonType::kObject},
                {"session", JsonType::kString},
                {"client_id", JsonType::kString},
                {"shard_id", JsonType::kString},
                {"model", JsonType::kObject}},
               "evaluate request");
  const StoreCredential cred = credential_from_json(req.at("store_credential"));
  const ModelSpec model = model_from_json(req.at("model"));
  auth::ClientAuthPolicy policy = env.policy;
  policy.required_scopes.emplace(auth::kScopeEvaluate);
  const double auth_s = authenticate_request(ctx, env.keys, policy, env.key_fetch_s, req);

  double t = ctx.elapsed();
  const GlobalModel global = env.store->get_global_model(cred, get_string(req, "session"));
  ctx.transfer(global.bytes);
  const LoadedShard shard = load_shard_cached(ctx, *env.shards, get_string(req, "shard_id"));
  if (!shard.partition->test || shard.partition->test->size() == 0) {
    throw FailedPrecondition("shard '" + shard.partition->shard_id + "' has no test split");
  }
  const double download_s = ctx.elapsed() - t;

  t = ctx.elapsed();
  const Dataset& test = *shard.partition->test;
  const Metrics m = evaluate(model, global.params, test.features(), test.labels());
  ctx.compute(2.0 * static_cast<double>(parameter_count(model) * test.size()));
  return {{"ok", true},
          {"loss", m.loss},
          {"accuracy", m.accuracy},
          {"test_cardinality", m.count},
          {"version", global.version},
          {"timing", {{"auth_s", auth_s}, {"download_s", download_s}, {"eval_s", ctx.elapsed() - t}}}};
}

}  // namespace

void PrivacyConfig::validate() const {
  if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
    throw InvalidArgument("noise multiplier must be finite and non-negative");
  }
  if (!(l2_clip_norm > 0.0) || !std::isfinite(l2_clip_norm)) {
    throw InvalidArgument("l2 clip norm must be positive");
  }
  if (microbatches == 0) throw InvalidArgument("microbatches must be positive");
  if (max_invocations == 0) throw InvalidArgument("max_invocations must be positive");
}

void ClientHyperparameters::validate() const {
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  optimizer.validate();
  if (dp) {
    dp->validate();
    if (batch_size % dp->microbatches != 0) {
      throw InvalidArgument("microbatches (" + std::to_string(dp->microbatches) +
                            ") must divide the batch size (" + std::to_string(batch_size) + ")");
    }
  }
}

json model_to_json(const ModelSpec& model) {
  return {{"kind", model_kind_name(model.kind)}, {"layer_sizes", model.layer_sizes}};
}

ModelSpec model_from_json(const json& j) {
  check_fields(j, {{"kind", JsonType::kString}, {"layer_sizes", JsonType::kArray}}, "model");
  ModelSpec m;
  m.kind = parse_model_kind(get_string(j, "kind"));
  for (const auto& v : j.at("layer_sizes")) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
      throw InvalidRequest("model: layer_sizes must hold positive integers");
    }
    m.layer_sizes.push_back(v.get<std::size_t>());
  }
  m.validate();
  return m;
}

json hyperparams_to_json(const ClientHyperparameters& hp) {
  json j = {{"local_epochs", hp.local_epochs},
            {"batch_size", hp.batch_size},
            {"optimizer",
             {{"kind", optimizer_kind_name(hp.optimizer.kind)},
              {"learning_rate", hp.optimizer.learning_rate}}}};
  if (hp.dp) {
    j["dp"] = {{"noise_multiplier", hp.dp->noise_multiplier},
               {"l2_clip_norm", hp.dp->l2_clip_norm},
               {"microbatches", hp.dp->microbatches},
               {"max_invocations", hp.dp->max_invocations}};
  }
  return j;
}

ClientHyperparameters hyperparams_from_json(const json& j) {
  check_fields(j,
               {{"local_epochs", JsonType::kUnsigned},
                {"batch_size", JsonType::kUnsigned},
                {"optimizer", JsonType::kObject},
                {"dp", JsonType::kObject, false}},
               "hyperparams");
  ClientHyperparameters hp;
  hp.local_epochs = get_unsigned(j, "local_epochs");
  hp.batch_size = get_unsigned(j, "batch_size");
  const json& opt = j.at("optimizer");
  check_fields(opt, {{"kind", JsonType::kString}, {"learning_rate", JsonType::kNumber}},
               "hyperparams.optimizer");
  hp.optimizer.kind = parse_optimizer_kind(get_string(opt, "kind"));
  hp.optimizer.learning_rate = get_number(opt, "learning_rate");
  if (j.contains("dp")) {
    const json& dp = j.at("dp");
    check_fields(dp,
                 {{"noise_multiplier", JsonType::kNumber},
                  {"l2_clip_norm", JsonType::kNumber},
                  {"microbatches", JsonType::kUnsigned},
                  {"max_invocations", JsonType::kUnsigned}},
                 "hyperparams.dp");
    PrivacyConfig cfg;
    cfg.noise_multiplier = get_number(dp, "noise_multiplier");
    cfg.l2_clip_norm = get_number(dp, "l2_clip_norm");
    cfg.microbatches = get_unsigned(dp, "microbatches");
    cfg.max_invocations = get_unsigned(dp, "max_invocations");
    hp.dp = cfg;
  }
  hp.validate();
  return hp;
}

std::uint64_t round_shuffle_seed(std::string_view session, std::uint64_t round,
                                 std::string_view client_id) {
  return crypto::stable_hash64(std::string(session) + "/" + std::to_string(round) + "/" +
                               std::string(client_id));
}

double l2_norm(const ParameterSet& p) {
  double sum = 0.0;
  for (const auto& e : p) {
    for (double v : e.tensor.data()) sum += v * v;
  }
  return std::sqrt(sum);
}

void clip_to_norm(ParameterSet& grad, double clip) {
  const double norm = l2_norm(grad);
  if (norm <= clip) return;
  const double scale = clip / norm;
  for (std::size_t t = 0; t < grad.size(); ++t) {
    for (double& v : grad.tensor(t).data()) v *= scale;
  }
}

ParameterSet dp_gradient(const ModelSpec& model, const ParameterSet& params, const Tensor& batch_x,
                         std::span<const int> labels, const PrivacyConfig& cfg,
                         std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t batch = labels.size();
  const std::size_t m = cfg.microbatches;
  if (batch == 0 || batch % m != 0) {
    throw InvalidArgument("batch of " + std::to_string(batch) + " does not split into " +
                          std::to_string(m) + " microbatches");
  }
  const std::size_t per = batch / m;
  ParameterSet sum = params.zeros_like();
  for (std::size_t i = 0; i < m; ++i) {
    auto lg = loss_and_gradient(model, params, slice_rows(batch_x, i * per, per),
                                labels.subspan(i * per, per));
    if (!std::isfinite(lg.loss)) throw NonFiniteError("non-finite loss in local training");
    clip_to_norm(lg.gradient, cfg.l2_clip_norm);
    add_into(sum, lg.gradient);
  }
  const double sigma = cfg.noise_multiplier * cfg.l2_clip_norm;
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t t = 0; t < sum.size(); ++t) {
    for (double& v : sum.tensor(t).data()) {
      if (sigma > 0.0) v += noise(rng);
      v *= inv_m;
    }
  }
  return sum;
}

LocalTrainResult local_train(const ModelSpec& model, ParameterSet params, const Dataset& data,
                             const ClientHyperparameters& hp, std::uint64_t seed) {
  hp.validate();
  const std::size_t n = data.size();
  if (n == 0) throw InvalidArgument("cannot train on an empty dataset");
  LocalTrainResult out;
  std::size_t batch = hp.batch_size;
  if (batch > n) {
    batch = n;
    out.batch_clamped = true;
  }
  OptimizerState opt(hp.optimizer);
  std::mt19937_64 shuffle_rng(seed);
  std::mt19937_64 noise_rng(seed ^ kNoiseStream);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < hp.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      if (hp.dp && len % hp.dp->microbatches != 0) {
        ++out.dropped_batches;
        continue;
      }
      const Tensor x = gather_rows(data.features(), rows);
      labels.resize(len);
      for (std::size_t i = 0; i < len; ++i) labels[i] = data.labels()[rows[i]];
      ParameterSet grad;
      if (hp.dp) {
        grad = dp_gradient(model, params, x, labels, *hp.dp, noise_rng);
      } else {
        auto lg = loss_and_gradient(model, params, x, labels);
        if (!std::isfinite(lg.loss)) throw NonFiniteError("non-finite loss in local training");
        grad = std::move(lg.gradient);
      }
      apply_update(opt, params, grad);
      ++out.steps;
      out.examples += len;
    }
  }
  out.params = std::move(params);
  return out;
}

BudgetDecision check_and_increment_budget(ParameterStore& store, const StoreCredential& cred,
                                          const std::string& client_id, const PrivacyConfig& cfg) {
  return store.check_and_increment(cred, client_id, cfg.max_invocations);
}

Handler make_client_handler(ClientFunctionEnv env) {
  if (!env.store || !env.shards || !env.keys) {
    throw InvalidArgument("client function needs a store, a shard registry and a key directory");
  }
  auto shared = std::make_shared<const ClientFunctionEnv>(std::move(env));
  return [shared](InvocationContext& ctx, const json& req) -> json {
    if (!req.is_object() || !req.contains("action") || !req.at("action").is_string()) {
      throw InvalidRequest("request needs a string 'action'");
    }
    const std::string action = req.at("action").get<std::string>();
    if (action == "train") return handle_train(ctx, *shared, req);
    if (action == "evaluate") return handle_evaluate(ctx, *shared, req);
    throw InvalidRequest("unknown action '" + action + "'");
  };
}

}  // namespace faasfl
