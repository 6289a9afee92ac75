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

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "faasfl/data.hpp"

namespace faasfl {

struct ShardFetch {
  std::shared_ptr<const Partition> partition;
  double latency_s = 0.0;     // injected serving delay
  std::size_t bytes = 0;      // payload size for transfer accounting
};

/// Local stand-in for a static file server holding one dataset shard per
/// URL. Shards are immutable once registered.
class ShardRegistry {
 public:
  void register_shard(Partition partition);

  // Throws NotFound for unknown ids.
  ShardFetch fetch(const std::string& shard_id) const;
  std::shared_ptr<const Partition> serve_shard(const std::string& shard_id) const {
    return fetch(shard_id).partition;
  }

  std::vector<std::string> list_shards() const;
  bool contains(const std::string& shard_id) const;

  // Serving delay added to every fetch (per-shard value wins if set).
  void set_fetch_latency(double seconds) { default_latency_.store(seconds); }
  void set_fetch_latency(const std::string& shard_id, double seconds);

  std::size_t fetch_count() const noexcept { return fetches_.load(); }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const Partition>> shards_;
  std::vector<std::string> order_;
  std::map<std::string, double> latency_;
  std::atomic<double> default_latency_{0.0};
  mutable std::atomic<std::size_t> fetches_{0};
};

struct ShardManifest {
  std::string shard_id;
  std::size_t cardinality = 0;
  std::size_t test_cardinality = 0;
  std::string checksum;  // sha256 hex of the .bin file
  std::size_t classes = 0;
};

// Writes <dir>/<shard_id>.bin (parameter container holding train/features,
// train/labels and, if present, test/features, test/labels) and
// <dir>/<shard_id>.json.
ShardManifest write_shard(const std::filesystem::path& dir, const Partition& partition);

// Verifies the manifest checksum; throws CorruptionError on mismatch.
Partition read_shard(const std::filesystem::path& dir, const std::string& shard_id);

// Registers every shard whose manifest sits in `dir`, sorted by id.
std::shared_ptr<ShardRegistry> load_shard_directory(const std::filesystem::path& dir);

}  // namespace faasfl
