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

#include "faasfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "faasfl/error.hpp"

namespace faasfl {
namespace {

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Partition make_partition(const Dataset& ds, std::size_t shard, std::vector<std::size_t> indices) {
  Partition p;
  p.shard_id = shard_name(shard);
  p.train = ds.subset(indices);
  p.train_indices = std::move(indices);
  return p;
}

// Contiguous cut of `order` into shard_count near-equal pieces.
std::vector<Partition> cut(const Dataset& ds, const std::vector<std::size_t>& order,
                           std::size_t shard_count) {
  if (shard_count == 0) throw InvalidArgument("shard_count must be at least 1");
  if (shard_count > order.size()) {
    throw InvalidArgument("cannot cut " + std::to_string(order.size()) + " examples into " +
                          std::to_string(shard_count) + " shards");
  }
  const std::size_t base = order.size() / shard_count;
  const std::size_t extra = order.size() % shard_count;
  std::vector<Partition> out;
  out.reserve(shard_count);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < shard_count; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                 order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    out.push_back(make_partition(ds, s, std::move(idx)));
    pos += len;
  }
  return out;
}

std::uint32_t read_be32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw CorruptionError("truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

}  // namespace

Dataset::Dataset(Tensor features, std::vector<int> labels, std::size_t classes)
    : features_(std::move(features)), labels_(std::move(labels)), classes_(classes) {
  if (features_.rank() != 2) {
    throw ShapeMismatch("features must be (N, d), got " + shape_to_string(features_.shape()));
  }
  if (features_.dim(0) != labels_.size()) {
    throw ShapeMismatch("features have " + std::to_string(features_.dim(0)) + " rows but " +
                        std::to_string(labels_.size()) + " labels");
  }
  for (int y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes_) {
      throw InvalidArgument("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes_) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InvalidArgument("a dataset subset needs at least one row");
  const std::size_t d = feature_dim();
  std::vector<double> x(indices.size() * d);
  std::vector<int> y(indices.size());
  const auto src = features_.data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= size()) throw InvalidArgument("row index " + std::to_string(i) + " out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                x.begin() + static_cast<std::ptrdiff_t>(r * d));
    y[r] = labels_[i];
  }
  return Dataset(Tensor({indices.size(), d}, std::move(x)), std::move(y), classes_);
}

std::string shard_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shard-%05zu", index);
  return buf;
}

std::vector<Partition> partition_sorted_label(const Dataset& ds, std::size_t shard_count) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto labels = ds.labels();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  return cut(ds, order, shard_count);
}

std::vector<Partition> partition_per_user(const Dataset& ds, std::span<const std::size_t> user_sizes,
                                          std::uint64_t seed) {
  const std::size_t total = std::accumulate(user_sizes.begin(), user_sizes.end(), std::size_t{0});
  if (total > ds.size()) {
    throw InvalidArgument("user sizes request " + std::to_string(total) + " examples, only " +
                          std::to_string(ds.size()) + " available");
  }
  const auto order = seeded_permutation(ds.size(), seed);
  std::vector<Partition> out;
  out.reserve(user_sizes.size());
  std::size_t pos = 0;
  for (std::size_t u = 0; u < user_sizes.size(); ++u) {
    if (user_sizes[u] == 0) throw InvalidArgument("user " + std::to_string(u) + " has no data");
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                 order.begin() + static_cast<std::ptrdiff_t>(pos + user_sizes[u]));
    out.push_back(make_partition(ds, u, std::move(idx)));
    pos += user_sizes[u];
  }
  return out;
}

std::vector<Partition> partition_iid(const Dataset& ds, std::size_t shard_count,
                                     std::uint64_t seed) {
  return cut(ds, seeded_permutation(ds.size(), seed), shard_count);
}

std::vector<std::size_t> lognormal_user_sizes(std::size_t users, double mean, double sigma,
                                              std::size_t min_size, std::uint64_t seed) {
  if (!(mean > 0.0) || sigma < 0.0) throw InvalidArgument("lognormal sizes need mean > 0");
  // E[X] = exp(mu + sigma^2 / 2)
  const double mu = std::log(mean) - 0.5 * sigma * sigma;
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> dist(mu, sigma);
  std::vector<std::size_t> sizes(users);
  for (auto& s : sizes) {
    s = std::max(min_size, static_cast<std::size_t>(std::llround(dist(rng))));
  }
  return sizes;
}

Partition split_train_test(Partition raw, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("test_fraction must lie in (0, 1)");
  }
  const std::size_t n = raw.train.size();
  if (n < 2) {
    throw InvalidArgument("shard '" + raw.shard_id + "' has " + std::to_string(n) +
                          " examples; a train/test split needs at least 2");
  }
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  auto perm = seeded_permutation(n, seed);
  std::vector<std::size_t> test_pos(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::sort(test_pos.begin(), test_pos.end());
  std::vector<std::size_t> train_pos;
  train_pos.reserve(n - n_test);
  for (std::size_t i = 0, t = 0; i < n; ++i) {
    if (t < test_pos.size() && test_pos[t] == i) {
      ++t;
    } else {
      train_pos.push_back(i);
    }
  }

  const bool have_indices = raw.train_indices.size() == n;
  auto map_indices = [&](const std::vector<std::size_t>& pos) {
    std::vector<std::size_t> out;
    if (!have_indices) return out;
    out.reserve(pos.size());
    for (std::size_t p : pos) out.push_back(raw.train_indices[p]);
    return out;
  };

  Partition out;
  out.shard_id = raw.shard_id;
  out.test = raw.train.subset(test_pos);
  out.train = raw.train.subset(train_pos);
  out.test_indices = map_indices(test_pos);
  out.train_indices = map_indices(train_pos);
  return out;
}

std::pair<Dataset, Dataset> make_gaussian_clusters(const GaussianClusterSpec& spec,
                                                   std::size_t train_size, std::size_t test_size) {
  if (spec.features == 0 || spec.classes < 2) {
    throw InvalidArgument("gaussian clusters need features >= 1 and classes >= 2");
  }
  if (train_size == 0 || test_size == 0) throw InvalidArgument("dataset sizes must be positive");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centres(spec.classes * spec.features);
  for (double& c : centres) c = spec.separation * normal(rng);

  auto sample = [&](std::size_t n) {
    std::vector<double> x(n * spec.features);
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t label = r % spec.classes;
      y[r] = static_cast<int>(label);
      for (std::size_t j = 0; j < spec.features; ++j) {
        x[r * spec.features + j] = centres[label * spec.features + j] + spec.noise_std * normal(rng);
      }
    }
    return Dataset(Tensor({n, spec.features}, std::move(x)), std::move(y), spec.classes);
  };
  Dataset train = sample(train_size);
  Dataset test = sample(test_size);
  return {std::move(train), std::move(test)};
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ifstream img(images, std::ios::binary);
  std::ifstream lab(labels, std::ios::binary);
  if (!img) throw NotFound("cannot open " + images.string());
  if (!lab) throw NotFound("cannot open " + labels.string());
  if (read_be32(img) != 0x00000803) throw CorruptionError(images.string() + ": not an IDX3 file");
  if (read_be32(lab) != 0x00000801) throw CorruptionError(labels.string() + ": not an IDX1 file");
  const std::size_t n = read_be32(img);
  const std::size_t rows = read_be32(img);
  const std::size_t cols = read_be32(img);
  if (read_be32(lab) != n) throw CorruptionError("IDX image and label counts differ");
  const std::size_t d = rows * cols;
  std::vector<unsigned char> raw(n * d);
  img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  std::vector<unsigned char> raw_labels(n);
  lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n));
  if (!img || !lab) throw CorruptionError("truncated IDX payload");
  std::vector<double> x(raw.size());
  std::transform(raw.begin(), raw.end(), x.begin(), [](unsigned char v) { return v / 255.0; });
  std::vector<int> y(raw_labels.begin(), raw_labels.end());
  const int max_label = y.empty() ? 0 : *std::max_element(y.begin(), y.end());
  return Dataset(Tensor({n, d}, std::move(x)), std::move(y), static_cast<std::size_t>(max_label) + 1);
}

}  // namespace faasfl
