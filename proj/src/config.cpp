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

#include "faasfl/config.hpp"

#include <initializer_list>
#include <optional>
#include <string>

#include <toml.hpp>

#include "faasfl/error.hpp"

namespace faasfl {
namespace {

/// Typed, strict view of one TOML table.
class Table {
 public:
  Table(const toml::table* table, std::string where) : table_(table), where_(std::move(where)) {}

  bool present() const noexcept { return table_ != nullptr; }

  void allow(std::initializer_list<std::string_view> keys) const {
    if (!table_) return;
    for (const auto& [key, value] : *table_) {
      bool ok = false;
      for (auto k : keys) ok = ok || k == key.str();
      if (!ok) throw InvalidArgument(where_ + ": unknown key '" + std::string(key.str()) + "'");
    }
  }

  Table sub(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return {nullptr, path(key)};
    if (!n->is_table()) throw InvalidArgument(path(key) + " must be a table");
    return {n->as_table(), path(key)};
  }

  std::optional<std::string> str(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) throw InvalidArgument(path(key) + " must be a string");
    return n->value<std::string>();
  }

  std::optional<double> num(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_number()) throw InvalidArgument(path(key) + " must be a number");
    return n->value<double>();
  }

  std::optional<std::uint64_t> count(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_integer() || *n->value<std::int64_t>() < 0) {
      throw InvalidArgument(path(key) + " must be a non-negative integer");
    }
    return static_cast<std::uint64_t>(*n->value<std::int64_t>());
  }

  std::optional<std::vector<double>> numbers(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_array()) throw InvalidArgument(path(key) + " must be an array");
    std::vector<double> out;
    for (const auto& v : *n->as_array()) {
      if (!v.is_number()) throw InvalidArgument(path(key) + " must hold numbers");
      out.push_back(*v.value<double>());
    }
    return out;
  }

  const toml::array* array(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (!n->is_array()) throw InvalidArgument(path(key) + " must be an array");
    return n->as_array();
  }

  const std::string& where() const noexcept { return where_; }

 private:
  const toml::node* node(std::string_view key) const { return table_ ? table_->get(key) : nullptr; }
  std::string path(std::string_view key) const { return where_ + "." + std::string(key); }

  const toml::table* table_;
  std::string where_;
};

toml::table parse(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFound("config file " + path.string() + " not found");
  try {
    return toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + std::string(e.description()));
  }
}

ColdStartProfile read_cold_start(const Table& t) {
  t.allow({"kind", "a", "b"});
  ColdStartProfile p;
  const std::string kind = t.str("kind").value_or("constant");
  if (kind == "constant") {
    p.kind = ColdStartProfile::Kind::kConstant;
  } else if (kind == "uniform") {
    p.kind = ColdStartProfile::Kind::kUniform;
  } else if (kind == "lognormal") {
    p.kind = ColdStartProfile::Kind::kLogNormal;
  } else {
    throw InvalidArgument(t.where() + ".kind: unknown cold-start kind '" + kind + "'");
  }
  p.a = t.num("a").value_or(p.a);
  p.b = t.num("b").value_or(p.b);
  if (p.a < 0.0 || p.b < 0.0) throw InvalidArgument(t.where() + ": parameters must be non-negative");
  if (p.kind == ColdStartProfile::Kind::kUniform && p.b < p.a) {
    throw InvalidArgument(t.where() + ": uniform needs b >= a");
  }
  return p;
}

void read_deployment(const Table& t, FunctionDeployment& d) {
  t.allow({"platform", "memory_limit_mb", "timeout_s", "keep_warm_s", "cpu_ghz", "cache_capacity",
           "cold_start", "function_id"});
  if (!t.present()) return;
  d.platform_label = t.str("platform").value_or(d.platform_label);
  d.function_id = t.str("function_id").value_or(d.function_id);
  d.memory_limit_mb = static_cast<std::uint32_t>(t.count("memory_limit_mb").value_or(d.memory_limit_mb));
  d.timeout_s = t.num("timeout_s").value_or(d.timeout_s);
  d.keep_warm_s = t.num("keep_warm_s").value_or(d.keep_warm_s);
  if (auto ghz = t.num("cpu_ghz")) d.cpu_ghz = *ghz;
  d.cache_capacity = t.count("cache_capacity").value_or(d.cache_capacity);
  if (auto cs = t.sub("cold_start"); cs.present()) d.cold_start = read_cold_start(cs);
}

}  // namespace

PartitionStrategy parse_partition_strategy(std::string_view name) {
  if (name == "sorted") return PartitionStrategy::kSortedLabelShards;
  if (name == "user") return PartitionStrategy::kPerUser;
  if (name == "iid") return PartitionStrategy::kIidUniform;
  throw InvalidArgument("unknown partition strategy '" + std::string(name) + "'");
}

SessionFile load_session_file(const std::filesystem::path& path) {
  const toml::table root = parse(path);
  const Table top(&root, path.filename().string());
  top.allow({"session", "model", "evaluation", "hyperparams", "data"});
  SessionFile f;
  SessionConfig& s = f.session;

  const Table st = top.sub("session");
  st.allow({"id", "clients_per_round", "total_clients", "max_rounds", "target_accuracy",
            "client_timeout_s", "aggregation_batch_size", "aggregation_mode", "seed", "api_token",
            "token_fetch_s"});
  s.session_id = st.str("id").value_or(s.session_id);
  s.clients_per_round = st.count("clients_per_round").value_or(s.clients_per_round);
  s.total_clients = st.count("total_clients").value_or(s.total_clients);
  s.max_rounds = st.count("max_rounds").value_or(s.max_rounds);
  s.target_accuracy = st.num("target_accuracy").value_or(s.target_accuracy);
  s.client_timeout_s = st.num("client_timeout_s").value_or(s.client_timeout_s);
  s.aggregation_batch_size = st.count("aggregation_batch_size").value_or(s.aggregation_batch_size);
  if (auto m = st.str("aggregation_mode")) s.aggregation_mode = parse_aggregation_mode(*m);
  s.seed = st.count("seed").value_or(s.seed);
  if (auto tok = st.str("api_token")) s.api_token = *tok;
  s.token_fetch_s = st.num("token_fetch_s").value_or(s.token_fetch_s);

  const Table mt = top.sub("model");
  mt.allow({"kind", "layer_sizes"});
  if (mt.present()) {
    if (auto k = mt.str("kind")) s.model.kind = parse_model_kind(*k);
    if (const auto* sizes = mt.array("layer_sizes")) {
      s.model.layer_sizes.clear();
      for (const auto& v : *sizes) {
        if (!v.is_integer() || *v.value<std::int64_t>() <= 0) {
          throw InvalidArgument(mt.where() + ".layer_sizes must hold positive integers");
        }
        s.model.layer_sizes.push_back(static_cast<std::size_t>(*v.value<std::int64_t>()));
      }
    }
  }

  const Table et = top.sub("evaluation");
  et.allow({"mode", "central_shard", "eval_clients_per_round"});
  const std::string mode = et.str("mode").value_or("central");
  if (mode == "central") {
    s.evaluation.mode = EvaluationConfig::Mode::kCentral;
  } else if (mode == "federated") {
    s.evaluation.mode = EvaluationConfig::Mode::kFederated;
  } else {
    throw InvalidArgument(et.where() + ".mode must be 'central' or 'federated'");
  }
  s.evaluation.central_shard = et.str("central_shard").value_or(s.evaluation.central_shard);
  s.evaluation.eval_clients_per_round =
      et.count("eval_clients_per_round").value_or(s.evaluation.eval_clients_per_round);

  const Table ht = top.sub("hyperparams");
  ht.allow({"local_epochs", "batch_size", "optimizer", "learning_rate", "dp"});
  ClientHyperparameters& hp = f.hyperparams;
  hp.local_epochs = ht.count("local_epochs").value_or(hp.local_epochs);
  hp.batch_size = ht.count("batch_size").value_or(hp.batch_size);
  if (auto o = ht.str("optimizer")) hp.optimizer.kind = parse_optimizer_kind(*o);
  hp.optimizer.learning_rate = ht.num("learning_rate").value_or(hp.optimizer.learning_rate);
  if (const Table dt = ht.sub("dp"); dt.present()) {
    dt.allow({"noise_multiplier", "l2_clip_norm", "microbatches", "max_invocations"});
    PrivacyConfig dp;
    dp.noise_multiplier = dt.num("noise_multiplier").value_or(dp.noise_multiplier);
    dp.l2_clip_norm = dt.num("l2_clip_norm").value_or(dp.l2_clip_norm);
    dp.microbatches = dt.count("microbatches").value_or(dp.microbatches);
    dp.max_invocations = dt.count("max_invocations").value_or(dp.max_invocations);
    hp.dp = dp;
  }

  const Table dt = top.sub("data");
  dt.allow({"source", "shards_dir", "train_size", "test_size", "features", "classes", "separation",
            "noise_std", "strategy", "shards", "user_size_sigma", "client_test_fraction",
            "fetch_latency_s", "seed"});
  DataConfig& d = f.data;
  const std::string source = dt.str("source").value_or("synthetic");
  if (source == "synthetic") {
    d.source = DataConfig::Source::kSynthetic;
  } else if (source == "directory") {
    d.source = DataConfig::Source::kDirectory;
    const auto dir = dt.str("shards_dir");
    if (!dir) throw InvalidArgument(dt.where() + ".shards_dir is required for a directory source");
    d.shards_dir = *dir;
    if (d.shards_dir.is_relative()) d.shards_dir = path.parent_path() / d.shards_dir;
  } else {
    throw InvalidArgument(dt.where() + ".source must be 'synthetic' or 'directory'");
  }
  d.train_size = dt.count("train_size").value_or(d.train_size);
  d.test_size = dt.count("test_size").value_or(d.test_size);
  d.synthetic.features = dt.count("features").value_or(s.model.feature_dim());
  d.synthetic.classes = dt.count("classes").value_or(s.model.classes());
  d.synthetic.separation = dt.num("separation").value_or(d.synthetic.separation);
  d.synthetic.noise_std = dt.num("noise_std").value_or(d.synthetic.noise_std);
  if (auto st2 = dt.str("strategy")) d.strategy = parse_partition_strategy(*st2);
  d.shards = dt.count("shards").value_or(d.shards);
  d.user_size_sigma = dt.num("user_size_sigma").value_or(d.user_size_sigma);
  d.client_test_fraction = dt.num("client_test_fraction").value_or(d.client_test_fraction);
  d.fetch_latency_s = dt.num("fetch_latency_s").value_or(d.fetch_latency_s);
  d.seed = dt.count("seed").value_or(s.seed);
  d.synthetic.seed = d.seed;

  s.validate();
  hp.validate();
  return f;
}

FabricConfig load_fabric_config(const std::filesystem::path& path) {
  const toml::table root = parse(path);
  const Table top(&root, path.filename().string());
  top.allow({"fabric", "platform", "client", "aggregator", "ghz_tiers"});
  FabricConfig cfg;

  const Table ft = top.sub("fabric");
  ft.allow({"billing_granularity_s", "timing", "key_fetch_s"});
  cfg.options.billing_granularity_s =
      ft.num("billing_granularity_s").value_or(cfg.options.billing_granularity_s);
  const std::string timing = ft.str("timing").value_or("virtual");
  if (timing == "virtual") {
    cfg.options.timing = TimingMode::kVirtual;
  } else if (timing == "measured") {
    cfg.options.timing = TimingMode::kMeasured;
  } else {
    throw InvalidArgument(ft.where() + ".timing must be 'virtual' or 'measured'");
  }
  cfg.key_fetch_s = ft.num("key_fetch_s").value_or(cfg.key_fetch_s);

  if (const auto* platforms = top.array("platform")) {
    std::size_t i = 0;
    for (const auto& node : *platforms) {
      if (!node.is_table()) throw InvalidArgument("platform entries must be tables");
      const Table pt(node.as_table(), "platform[" + std::to_string(i++) + "]");
      pt.allow({"label", "bandwidth_bytes_per_s", "gflops", "request_overhead_s", "cold_start"});
      PlatformProfile p;
      const auto label = pt.str("label");
      if (!label) throw InvalidArgument(pt.where() + ".label is required");
      p.label = *label;
      p.bandwidth_bytes_per_s = pt.num("bandwidth_bytes_per_s").value_or(p.bandwidth_bytes_per_s);
      p.gflops = pt.num("gflops").value_or(p.gflops);
      p.request_overhead_s = pt.num("request_overhead_s").value_or(p.request_overhead_s);
      if (auto cs = pt.sub("cold_start"); cs.present()) p.cold_start = read_cold_start(cs);
      cfg.platforms.push_back(std::move(p));
    }
  }
  read_deployment(top.sub("client"), cfg.client);
  read_deployment(top.sub("aggregator"), cfg.aggregator);

  if (const Table gt = top.sub("ghz_tiers"); gt.present()) {
    cfg.options.ghz_tiers.clear();
    for (const auto& [key, value] : *root["ghz_tiers"].as_table()) {
      std::uint32_t mb = 0;
      try {
        mb = static_cast<std::uint32_t>(std::stoul(std::string(key.str())));
      } catch (const std::logic_error&) {
        throw InvalidArgument("ghz_tiers keys must be memory sizes in MB");
      }
      if (!value.is_number()) throw InvalidArgument("ghz_tiers values must be numbers");
      cfg.options.ghz_tiers[mb] = *value.value<double>();
    }
  }
  return cfg;
}

PriceFile load_price_file(const std::filesystem::path& path) {
  const toml::table root = parse(path);
  const Table top(&root, path.filename().string());
  top.allow({"faas", "iaas", "report"});
  PriceFile f;
  const Table ft = top.sub("faas");
  ft.allow({"price_per_invocation", "price_per_gb_second", "price_per_ghz_second",
            "price_per_egress_gb"});
  const Table it = top.sub("iaas");
  it.allow({"price_per_instance_hour", "instances", "price_per_egress_gb", "billing_granularity_s"});
  if (!ft.present() || !it.present()) {
    throw InvalidArgument(path.string() + ": both [faas] and [iaas] price tables are required");
  }
  auto need = [](const Table& t, std::string_view key) {
    auto v = t.num(key);
    if (!v) throw InvalidArgument(t.where() + "." + std::string(key) + " is required");
    return *v;
  };
  f.model.faas.price_per_invocation = need(ft, "price_per_invocation");
  f.model.faas.price_per_gb_second = need(ft, "price_per_gb_second");
  f.model.faas.price_per_ghz_second = need(ft, "price_per_ghz_second");
  f.model.faas.price_per_egress_gb = need(ft, "price_per_egress_gb");
  f.model.iaas.price_per_instance_hour = need(it, "price_per_instance_hour");
  f.model.iaas.price_per_egress_gb = need(it, "price_per_egress_gb");
  const auto instances = it.count("instances");
  if (!instances || *instances == 0) throw InvalidArgument(it.where() + ".instances must be positive");
  f.model.iaas.instances = *instances;
  f.model.iaas.billing_granularity_s =
      it.num("billing_granularity_s").value_or(f.model.iaas.billing_granularity_s);
  f.model.validate();

  const Table rt = top.sub("report");
  rt.allow({"target_accuracies", "multipliers"});
  f.target_accuracies = rt.numbers("target_accuracies").value_or(std::vector<double>{});
  f.multipliers = rt.numbers("multipliers").value_or(f.multipliers);
  return f;
}

std::vector<Partition> make_partitions(const DataConfig& data, const SessionConfig& session) {
  if (data.source != DataConfig::Source::kSynthetic) {
    throw InvalidArgument("make_partitions needs a synthetic data source");
  }
  const auto [train, test] = make_gaussian_clusters(data.synthetic, data.train_size, data.test_size);
  const std::size_t shards = data.shards ? data.shards : session.total_clients;
  std::vector<Partition> parts;
  switch (data.strategy) {
    case PartitionStrategy::kSortedLabelShards: parts = partition_sorted_label(train, shards); break;
    case PartitionStrategy::kIidUniform: parts = partition_iid(train, shards, data.seed); break;
    case PartitionStrategy::kPerUser: {
      const auto sizes = lognormal_user_sizes(
          shards, static_cast<double>(train.size()) / static_cast<double>(shards) * 0.9,
          data.user_size_sigma, 2, data.seed);
      parts = partition_per_user(train, sizes, data.seed);
      break;
    }
  }
  // Federated evaluation needs local test splits; 10% unless configured.
  const bool federated = session.evaluation.mode == EvaluationConfig::Mode::kFederated;
  const double fraction =
      data.client_test_fraction > 0.0 ? data.client_test_fraction : (federated ? 0.1 : 0.0);
  if (fraction > 0.0) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      parts[i] = split_train_test(std::move(parts[i]), fraction, data.seed + i);
    }
  }
  if (session.evaluation.mode == EvaluationConfig::Mode::kCentral) {
    Partition central;
    central.shard_id = session.evaluation.central_shard;
    central.train = test;
    central.test = test;
    parts.push_back(std::move(central));
  }
  return parts;
}

std::shared_ptr<ShardRegistry> build_shards(const DataConfig& data, const SessionConfig& session) {
  std::shared_ptr<ShardRegistry> registry;
  if (data.source == DataConfig::Source::kDirectory) {
    registry = load_shard_directory(data.shards_dir);
  } else {
    registry = std::make_shared<ShardRegistry>();
    for (auto& p : make_partitions(data, session)) registry->register_shard(std::move(p));
  }
  registry->set_fetch_latency(data.fetch_latency_s);
  return registry;
}

}  // namespace faasfl
