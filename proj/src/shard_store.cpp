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

#include "faasfl/shard_store.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "faasfl/crypto.hpp"
#include "faasfl/error.hpp"
#include "faasfl/serialize.hpp"

namespace faasfl {
namespace {

Tensor labels_tensor(std::span<const int> labels) {
  std::vector<double> v(labels.begin(), labels.end());
  return Tensor({labels.size()}, std::move(v));
}

Dataset dataset_from(const ParameterSet& ps, const std::string& prefix, std::size_t classes) {
  const Tensor& x = ps.get(prefix + "/features");
  const Tensor& y = ps.get(prefix + "/labels");
  std::vector<int> labels(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) labels[i] = static_cast<int>(y[i]);
  return Dataset(x, std::move(labels), classes);
}

}  // namespace

void ShardRegistry::register_shard(Partition partition) {
  std::unique_lock lock(mu_);
  const std::string id = partition.shard_id;
  if (shards_.contains(id)) throw InvalidArgument("shard '" + id + "' already registered");
  shards_.emplace(id, std::make_shared<const Partition>(std::move(partition)));
  order_.push_back(id);
}

ShardFetch ShardRegistry::fetch(const std::string& shard_id) const {
  std::shared_lock lock(mu_);
  auto it = shards_.find(shard_id);
  if (it == shards_.end()) throw NotFound("shard '" + shard_id + "' is not registered");
  fetches_.fetch_add(1);
  ShardFetch f;
  f.partition = it->second;
  auto lat = latency_.find(shard_id);
  f.latency_s = lat != latency_.end() ? lat->second : default_latency_.load();
  f.bytes = f.partition->train.byte_size() + (f.partition->test ? f.partition->test->byte_size() : 0);
  return f;
}

std::vector<std::string> ShardRegistry::list_shards() const {
  std::shared_lock lock(mu_);
  return order_;
}

bool ShardRegistry::contains(const std::string& shard_id) const {
  std::shared_lock lock(mu_);
  return shards_.contains(shard_id);
}

void ShardRegistry::set_fetch_latency(const std::string& shard_id, double seconds) {
  std::unique_lock lock(mu_);
  latency_[shard_id] = seconds;
}

ShardManifest write_shard(const std::filesystem::path& dir, const Partition& partition) {
  ParameterSet ps;
  ps.add("train/features", partition.train.features());
  ps.add("train/labels", labels_tensor(partition.train.labels()));
  if (partition.test) {
    ps.add("test/features", partition.test->features());
    ps.add("test/labels", labels_tensor(partition.test->labels()));
  }
  const Bytes bytes = encode_parameters(ps);
  write_file_atomic(dir / (partition.shard_id + ".bin"), bytes);

  ShardManifest m;
  m.shard_id = partition.shard_id;
  m.cardinality = partition.cardinality();
  m.test_cardinality = partition.test_cardinality();
  m.checksum = crypto::to_hex(crypto::sha256(bytes));
  m.classes = partition.train.classes();

  nlohmann::json j = {{"shard_id", m.shard_id},
                      {"cardinality", m.cardinality},
                      {"test_cardinality", m.test_cardinality},
                      {"checksum", m.checksum},
                      {"classes", m.classes}};
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(dir / (partition.shard_id + ".json"),
                    std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return m;
}

Partition read_shard(const std::filesystem::path& dir, const std::string& shard_id) {
  std::ifstream in(dir / (shard_id + ".json"));
  if (!in) throw NotFound("no manifest for shard '" + shard_id + "' in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("shard manifest '" + shard_id + "': " + e.what());
  }
  const Bytes bytes = read_file(dir / (shard_id + ".bin"));
  if (crypto::to_hex(crypto::sha256(bytes)) != j.at("checksum").get<std::string>()) {
    throw CorruptionError("checksum mismatch for shard '" + shard_id + "'");
  }
  const ParameterSet ps = decode_parameters(bytes);
  const auto classes = j.at("classes").get<std::size_t>();
  Partition p;
  p.shard_id = shard_id;
  p.train = dataset_from(ps, "train", classes);
  if (ps.find("test/features") != nullptr) p.test = dataset_from(ps, "test", classes);
  if (p.cardinality() != j.at("cardinality").get<std::size_t>() ||
      p.test_cardinality() != j.at("test_cardinality").get<std::size_t>()) {
    throw CorruptionError("cardinality mismatch for shard '" + shard_id + "'");
  }
  return p;
}

std::shared_ptr<ShardRegistry> load_shard_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw NotFound("shard directory " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  auto registry = std::make_shared<ShardRegistry>();
  for (const auto& id : ids) registry->register_shard(read_shard(dir, id));
  return registry;
}

}  // namespace faasfl
