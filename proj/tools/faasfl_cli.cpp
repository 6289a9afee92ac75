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

// faasfl command-line entry point: partition, run, evaluate, estimate-cost.
// Failures print one line "error: <code>: <message>" and exit 2.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "faasfl/config.hpp"
#include "faasfl/cost.hpp"
#include "faasfl/error.hpp"
#include "faasfl/model.hpp"
#include "faasfl/shard_store.hpp"
#include "faasfl/system.hpp"

namespace {

using nlohmann::json;
using namespace faasfl;

// "synthetic" or "synthetic:train=N,test=N,features=N,classes=N,separation=X,noise=X"
// or "<images.idx>,<labels.idx>".
struct DatasetSource {
  std::optional<GaussianClusterSpec> synthetic;
  std::size_t train = 60000;
  std::size_t test = 10000;
  std::string images;
  std::string labels;
};

DatasetSource parse_dataset(const std::string& text, std::uint64_t seed) {
  DatasetSource src;
  if (text.rfind("synthetic", 0) == 0) {
    GaussianClusterSpec spec;
    spec.seed = seed;
    if (text.size() > 9) {
      if (text[9] != ':') throw InvalidArgument("expected 'synthetic:key=value,...'");
      std::stringstream ss(text.substr(10));
      for (std::string kv; std::getline(ss, kv, ',');) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InvalidArgument("bad synthetic option '" + kv + "'");
        const std::string k = kv.substr(0, eq);
        const std::string v = kv.substr(eq + 1);
        try {
          if (k == "train") src.train = std::stoull(v);
          else if (k == "test") src.test = std::stoull(v);
          else if (k == "features") spec.features = std::stoull(v);
          else if (k == "classes") spec.classes = std::stoull(v);
          else if (k == "separation") spec.separation = std::stod(v);
          else if (k == "noise") spec.noise_std = std::stod(v);
          else throw InvalidArgument("unknown synthetic option '" + k + "'");
        } catch (const std::logic_error&) {
          throw InvalidArgument("bad value for synthetic option '" + k + "'");
        }
      }
    }
    src.synthetic = spec;
    return src;
  }
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw InvalidArgument("--dataset takes 'synthetic[:...]' or '<images.idx>,<labels.idx>'");
  }
  src.images = text.substr(0, comma);
  src.labels = text.substr(comma + 1);
  return src;
}

int cmd_partition(const std::string& dataset, const std::string& strategy, std::size_t shards,
                  const std::string& out, double test_fraction, std::uint64_t seed) {
  if (shards == 0) throw InvalidArgument("--shards must be positive");
  const DatasetSource src = parse_dataset(dataset, seed);
  Dataset train;
  std::optional<Dataset> central;
  if (src.synthetic) {
    auto [tr, te] = make_gaussian_clusters(*src.synthetic, src.train, src.test);
    train = std::move(tr);
    central = std::move(te);
  } else {
    train = load_idx(src.images, src.labels);
  }
  std::vector<Partition> parts;
  switch (parse_partition_strategy(strategy)) {
    case PartitionStrategy::kSortedLabelShards: parts = partition_sorted_label(train, shards); break;
    case PartitionStrategy::kIidUniform: parts = partition_iid(train, shards, seed); break;
    case PartitionStrategy::kPerUser: {
      const auto sizes = lognormal_user_sizes(
          shards, 0.9 * static_cast<double>(train.size()) / static_cast<double>(shards), 0.5, 2, seed);
      parts = partition_per_user(train, sizes, seed);
      break;
    }
  }
  if (test_fraction > 0.0) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      parts[i] = split_train_test(std::move(parts[i]), test_fraction, seed + i);
    }
  }
  std::size_t examples = 0;
  for (const auto& p : parts) {
    write_shard(out, p);
    examples += p.cardinality();
  }
  if (central) {
    Partition c;
    c.shard_id = "central-test";
    c.train = *central;
    c.test = *central;
    write_shard(out, c);
  }
  std::cout << json{{"shards", parts.size()},
                    {"examples", examples},
                    {"central_test", central.has_value()},
                    {"out", out}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_run(const std::string& config, const std::string& fabric, const std::string& metrics,
            const std::string& trace, const std::string& store_dir, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> max_rounds) {
  SessionFile sf = load_session_file(config);
  if (seed) {
    sf.session.seed = *seed;
    sf.data.seed = *seed;
    sf.data.synthetic.seed = *seed;
  }
  if (max_rounds) sf.session.max_rounds = *max_rounds;
  const FabricConfig fc = fabric.empty() ? FabricConfig{} : load_fabric_config(fabric);
  StoreOptions so;
  if (!store_dir.empty()) so.directory = store_dir;
  FederatedSystem system(sf.session, fc, sf.hyperparams, build_shards(sf.data, sf.session), so,
                         sf.session.seed);
  const auto reports =
      system.run(metrics.empty() ? std::nullopt : std::optional<std::filesystem::path>(metrics));
  if (!trace.empty()) write_records_csv(trace, system.fabric().records());
  const auto& last = reports.back();
  json summary = {{"rounds", reports.size()},
                  {"virtual_time_s", system.clock().now()},
                  {"invocations", system.fabric().records().size()},
                  {"reached_target", last.global_metrics &&
                                         last.global_metrics->accuracy >= sf.session.target_accuracy}};
  if (last.global_metrics) {
    summary["accuracy"] = last.global_metrics->accuracy;
    summary["loss"] = last.global_metrics->loss;
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& session, const std::string& mode, const std::string& store_dir,
                 const std::string& shards_dir, const std::string& central_shard) {
  StoreOptions so;
  so.directory = store_dir;
  ParameterStore store(so);
  const GlobalModel global = store.get_global_model(store.admin_credential(), session);
  const ModelSpec model = infer_model_spec(global.params);
  const auto registry = load_shard_directory(shards_dir);
  TestMetrics result;
  if (mode == "central") {
    const auto part = registry->serve_shard(central_shard);
    const Dataset& test = part->test ? *part->test : part->train;
    const Metrics m = evaluate(model, global.params, test.features(), test.labels());
    result = {m.loss, m.accuracy, m.count};
  } else if (mode == "federated") {
    std::vector<TestMetrics> per_client;
    for (const auto& id : registry->list_shards()) {
      if (id == central_shard) continue;
      const auto part = registry->serve_shard(id);
      if (!part->test || part->test->size() == 0) continue;
      const Metrics m = evaluate(model, global.params, part->test->features(), part->test->labels());
      per_client.push_back({m.loss, m.accuracy, m.count});
    }
    if (per_client.empty()) throw FailedPrecondition("no shard carries a local test split");
    result = federated_eval_aggregate(per_client);
  } else {
    throw InvalidArgument("--mode must be 'central' or 'federated'");
  }
  std::cout << json{{"session", session},
                    {"version", global.version},
                    {"mode", mode},
                    {"loss", result.loss},
                    {"accuracy", result.accuracy},
                    {"test_cardinality", result.test_cardinality}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_estimate_cost(const std::string& trace, const std::string& prices, const std::string& metrics,
                      const std::string& out) {
  const PriceFile pf = load_price_file(prices);
  const auto records = client_records(read_records_csv(trace));
  const auto rounds = read_metrics_csv(metrics);
  double wall = 0.0;
  for (const auto& r : rounds) wall += r.total_s;
  const CostEstimate est = compare(records, wall, pf.model, pf.multipliers);
  if (!out.empty()) {
    write_cost_curve_csv(out, cost_curve(records, rounds, pf.model, pf.target_accuracies, pf.multipliers));
  }
  json band = json::array();
  for (const auto& b : est.band) {
    band.push_back({{"multiplier", b.multiplier}, {"faas_cost", b.faas_cost}, {"iaas_cost", b.iaas_cost}});
  }
  std::cout << json{{"faas_cost", est.faas.total},
                    {"iaas_cost", est.iaas.total},
                    {"relative_gap", est.relative_gap()},
                    {"faas",
                     {{"invocations", est.faas.invocations},
                      {"invocation_cost", est.faas.invocation_cost},
                      {"memory_cost", est.faas.memory_cost},
                      {"cpu_cost", est.faas.cpu_cost},
                      {"network_cost", est.faas.network_cost}}},
                    {"iaas",
                     {{"instance_hours", est.iaas.instance_hours},
                      {"compute_cost", est.iaas.compute_cost},
                      {"network_cost", est.iaas.network_cost}}},
                    {"wall_time_s", wall},
                    {"band", band}}
                   .dump()
            << "\n";
  return 0;
}

int fail(std::string_view code, std::string_view message) {
  std::string flat(message);
  for (char& c : flat) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::fprintf(stderr, "error: %.*s: %s\n", static_cast<int>(code.size()), code.data(), flat.c_str());
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"faasfl: serverless federated learning simulator"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Seed for every random choice (overrides config files)");

  std::string dataset = "synthetic", strategy = "sorted", out_dir;
  std::size_t shards = 200;
  double test_fraction = 0.0;
  auto* partition = app.add_subcommand("partition", "Split a dataset into client shards");
  partition->add_option("--dataset", dataset, "'synthetic[:k=v,...]' or '<images.idx>,<labels.idx>'")
      ->capture_default_str();
  partition->add_option("--strategy", strategy, "sorted | user | iid")
      ->check(CLI::IsMember({"sorted", "user", "iid"}))
      ->capture_default_str();
  partition->add_option("--shards", shards, "Number of client shards")->capture_default_str();
  partition->add_option("--out", out_dir, "Output directory")->required();
  partition->add_option("--test-fraction", test_fraction, "Local test split per shard (0 = none)")
      ->capture_default_str();
  partition->add_option("--seed", seed, "Seed for data generation and shuffles");

  std::string config, fabric, metrics, trace, store_dir;
  std::optional<std::size_t> max_rounds;
  auto* run = app.add_subcommand("run", "Run a federated training session");
  run->add_option("--config", config, "Session TOML file")->required()->check(CLI::ExistingFile);
  run->add_option("--fabric", fabric, "Fabric TOML file")->check(CLI::ExistingFile);
  run->add_option("--metrics", metrics, "Per-round metrics CSV (appended)");
  run->add_option("--trace", trace, "Invocation record CSV to write");
  run->add_option("--store", store_dir, "Keep the parameter store in this directory");
  run->add_option("--max-rounds", max_rounds, "Override the session's max_rounds");
  run->add_option("--seed", seed, "Override the session seed");

  std::string session, mode = "central", shards_dir, central_shard = "central-test";
  auto* eval = app.add_subcommand("evaluate", "Evaluate the latest global model of a stored session");
  eval->add_option("--session", session, "Session id")->required();
  eval->add_option("--mode", mode, "central | federated")
      ->check(CLI::IsMember({"central", "federated"}))
      ->capture_default_str();
  eval->add_option("--store", store_dir, "Parameter store directory")->required();
  eval->add_option("--shards", shards_dir, "Shard directory")->required();
  eval->add_option("--central-shard", central_shard, "Shard holding the central test set")
      ->capture_default_str();
  eval->add_option("--seed", seed, "Accepted for uniformity; evaluation is deterministic");

  std::string prices, wall_from, cost_out;
  auto* cost = app.add_subcommand("estimate-cost", "Compare FaaS and IaaS client costs");
  cost->add_option("--trace", trace, "Invocation record CSV")->required()->check(CLI::ExistingFile);
  cost->add_option("--prices", prices, "Price TOML file")->required()->check(CLI::ExistingFile);
  cost->add_option("--wall-time-from", wall_from, "Metrics CSV of the session")
      ->required()
      ->check(CLI::ExistingFile);
  cost->add_option("--out", cost_out, "Cost-by-round CSV to write");
  cost->add_option("--seed", seed, "Accepted for uniformity; costing is deterministic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*partition) {
      return cmd_partition(dataset, strategy, shards, out_dir, test_fraction, seed.value_or(0));
    }
    if (*run) return cmd_run(config, fabric, metrics, trace, store_dir, seed, max_rounds);
    if (*eval) return cmd_evaluate(session, mode, store_dir, shards_dir, central_shard);
    if (*cost) return cmd_estimate_cost(trace, prices, wall_from, cost_out);
  } catch (const faasfl::Error& e) {
    return fail(error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
