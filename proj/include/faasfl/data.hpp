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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "faasfl/tensor.hpp"

namespace faasfl {

/// Labelled examples: features (N, d) and N integer labels in [0, classes).
class Dataset {
 public:
  Dataset() = default;
  Dataset(Tensor features, std::vector<int> labels, std::size_t classes);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t feature_dim() const { return features_.dim(1); }
  std::size_t classes() const noexcept { return classes_; }

  const Tensor& features() const noexcept { return features_; }
  std::span<const int> labels() const noexcept { return labels_; }

  // Rows at `indices`, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

  std::size_t byte_size() const noexcept {
    return features_.size() * sizeof(double) + labels_.size() * sizeof(int);
  }

 private:
  Tensor features_;
  std::vector<int> labels_;
  std::size_t classes_ = 0;
};

/// One client's share of a dataset. Index vectors refer to rows of the
/// source dataset the partition was cut from.
struct Partition {
  std::string shard_id;
  Dataset train;
  std::optional<Dataset> test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;

  std::size_t cardinality() const noexcept { return train.size(); }
  std::size_t test_cardinality() const noexcept { return test ? test->size() : 0; }
};

enum class PartitionStrategy { kSortedLabelShards, kPerUser, kIidUniform };

std::string shard_name(std::size_t index);

// Stable sort by label, then contiguous shards. With N = q*S + r the first r
// shards get q+1 examples.
std::vector<Partition> partition_sorted_label(const Dataset& ds, std::size_t shard_count);

// Shard k receives exactly user_sizes[k] examples drawn without replacement
// from a seeded permutation.
std::vector<Partition> partition_per_user(const Dataset& ds, std::span<const std::size_t> user_sizes,
                                          std::uint64_t seed);

// Seeded permutation cut into near-equal shards (same remainder rule).
std::vector<Partition> partition_iid(const Dataset& ds, std::size_t shard_count,
                                     std::uint64_t seed);

// Log-normal per-user sizes with the given mean, each at least `min_size`.
std::vector<std::size_t> lognormal_user_sizes(std::size_t users, double mean, double sigma,
                                              std::size_t min_size, std::uint64_t seed);

// Moves round(test_fraction * N) examples (at least one) into the test split.
Partition split_train_test(Partition raw, double test_fraction, std::uint64_t seed);

struct GaussianClusterSpec {
  std::size_t features = 32;
  std::size_t classes = 10;
  double separation = 1.0;  // scale of the random class centres
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

// Balanced classes (label i % classes for row i). Train and test share the
// same class centres.
std::pair<Dataset, Dataset> make_gaussian_clusters(const GaussianClusterSpec& spec,
                                                   std::size_t train_size, std::size_t test_size);

// MNIST-style IDX files; pixel values are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

}  // namespace faasfl
