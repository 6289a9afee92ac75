#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "faasfl/error.hpp"
#include "faasfl/serialize.hpp"
#include "faasfl/shard_store.hpp"
#include "helpers.hpp"

using namespace faasfl;

namespace {

Dataset labelled(std::vector<int> labels, std::size_t classes) {
  const std::size_t n = labels.size();
  std::vector<double> x(n);
  std::iota(x.begin(), x.end(), 0.0);  // feature = original row index
  return Dataset(Tensor({n, 1}, std::move(x)), std::move(labels), classes);
}

void check_coverage(const std::vector<Partition>& parts, std::size_t n, bool exact) {
  std::vector<int> seen(n, 0);
  for (const auto& p : parts) {
    CHECK(p.cardinality() == p.train_indices.size());
    for (auto i : p.train_indices) ++seen.at(i);
    for (auto i : p.test_indices) ++seen.at(i);
  }
  for (int s : seen) {
    CHECK(s <= 1);
    if (exact) CHECK(s == 1);
  }
}

}  // namespace

TEST_CASE("sorted-label partition: 60000 into 200 shards of 300") {
  GaussianClusterSpec spec;
  spec.features = 2;
  auto [train, test] = make_gaussian_clusters(spec, 60000, 100);
  const auto parts = partition_sorted_label(train, 200);
  REQUIRE(parts.size() == 200);
  for (const auto& p : parts) {
    CHECK(p.cardinality() == 300);
    // Brute-force count of distinct labels per shard.
    std::set<int> labels(p.train.labels().begin(), p.train.labels().end());
    CHECK(labels.size() <= 2);
  }
  check_coverage(parts, 60000, true);
}

TEST_CASE("sorted-label partition: two shards split labels cleanly") {
  const Dataset ds = labelled({1, 0, 1, 0, 1, 0, 1, 0, 1, 0}, 2);
  const auto parts = partition_sorted_label(ds, 2);
  for (int v : parts[0].train.labels()) CHECK(v == 0);
  for (int v : parts[1].train.labels()) CHECK(v == 1);
  // Stable sort keeps original order inside each label.
  CHECK(parts[0].train_indices == std::vector<std::size_t>{1, 3, 5, 7, 9});
}

TEST_CASE("sorted-label remainder goes one per shard from the front") {
  const Dataset ds = test::random_dataset(11, 2, 3, 1);
  const auto parts = partition_sorted_label(ds, 4);
  CHECK(parts[0].cardinality() == 3);
  CHECK(parts[1].cardinality() == 3);
  CHECK(parts[2].cardinality() == 3);
  CHECK(parts[3].cardinality() == 2);
  check_coverage(parts, 11, true);
  CHECK_THROWS_AS(partition_sorted_label(ds, 12), InvalidArgument);
  CHECK_THROWS_AS(partition_sorted_label(ds, 0), InvalidArgument);
}

TEST_CASE("sorted-label concentration bound holds for assorted sizes") {
  for (std::size_t per_class : {7u, 20u, 33u}) {
    for (std::size_t shards : {3u, 10u, 17u}) {
      std::vector<int> labels;
      for (int c = 0; c < 5; ++c) labels.insert(labels.end(), per_class, c);
      const Dataset ds = labelled(labels, 5);
      const auto parts = partition_sorted_label(ds, shards);
      for (const auto& p : parts) {
        const std::size_t s = p.cardinality();
        if (s > per_class) continue;
        std::set<int> distinct(p.train.labels().begin(), p.train.labels().end());
        CHECK(distinct.size() <= (s + per_class - 1) / per_class + 1);
      }
    }
  }
}

TEST_CASE("per-user partition honours exact sizes and is deterministic") {
  const Dataset ds = test::random_dataset(10, 2, 2, 4);
  const std::vector<std::size_t> sizes = {5, 3, 2};
  const auto a = partition_per_user(ds, sizes, 9);
  REQUIRE(a.size() == 3);
  CHECK(a[0].cardinality() == 5);
  CHECK(a[1].cardinality() == 3);
  CHECK(a[2].cardinality() == 2);
  check_coverage(a, 10, true);
  const auto b = partition_per_user(ds, sizes, 9);
  for (std::size_t k = 0; k < 3; ++k) CHECK(a[k].train_indices == b[k].train_indices);
  const std::vector<std::size_t> too_many = {6, 5};
  CHECK_THROWS_AS(partition_per_user(ds, too_many, 9), InvalidArgument);
}

TEST_CASE("log-normal user sizes average about 226") {
  const auto sizes = lognormal_user_sizes(100, 226.0, 0.5, 1, 3);
  CHECK(sizes.size() == 100);
  const double mean =
      std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(sizes.size());
  CHECK(std::abs(mean - 226.0) <= 0.2 * 226.0);
  CHECK(*std::min_element(sizes.begin(), sizes.end()) >= 1);
  CHECK(std::set<std::size_t>(sizes.begin(), sizes.end()).size() > 10);  // genuinely unbalanced
}

TEST_CASE("iid partition covers the dataset") {
  const Dataset ds = test::random_dataset(103, 2, 4, 2);
  const auto parts = partition_iid(ds, 10, 5);
  check_coverage(parts, 103, true);
  CHECK(parts[0].cardinality() == 11);
  CHECK(parts[9].cardinality() == 10);
}

TEST_CASE("train/test split sizes and coverage") {
  const Dataset ds = test::random_dataset(300, 2, 3, 3);
  auto parts = partition_iid(ds, 1, 0);
  const Partition split = split_train_test(parts[0], 0.1, 7);
  CHECK(split.cardinality() == 270);
  CHECK(split.test_cardinality() == 30);

  const Dataset two = test::random_dataset(2, 2, 2, 3);
  const Partition s2 = split_train_test(partition_iid(two, 1, 0)[0], 0.5, 1);
  CHECK(s2.cardinality() == 1);
  CHECK(s2.test_cardinality() == 1);

  // Exhaustive index-set equality for every N up to 1000 (stride keeps it quick).
  for (std::size_t n = 2; n <= 1000; n += (n < 50 ? 1 : 37)) {
    const Dataset d = test::random_dataset(n, 1, 2, n);
    const Partition raw = partition_iid(d, 1, n)[0];
    const Partition s = split_train_test(raw, 0.1, n);
    std::vector<std::size_t> all = s.train_indices;
    all.insert(all.end(), s.test_indices.begin(), s.test_indices.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect = raw.train_indices;
    std::sort(expect.begin(), expect.end());
    CHECK(all == expect);
    CHECK(s.test_cardinality() >= 1);
    CHECK(s.test_cardinality() == std::max<std::size_t>(1, std::llround(0.1 * n)));
  }
  const Dataset one = test::random_dataset(1, 1, 2, 1);
  CHECK_THROWS_AS(split_train_test(partition_iid(one, 1, 0)[0], 0.5, 1), InvalidArgument);
  CHECK_THROWS_AS(split_train_test(parts[0], 1.0, 1), InvalidArgument);
}

TEST_CASE("partitions are deterministic and byte-identical") {
  const Dataset ds = test::random_dataset(200, 3, 4, 6);
  const auto a = partition_iid(ds, 7, 11);
  const auto b = partition_iid(ds, 7, 11);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].train.features() == b[k].train.features());
    CHECK(std::equal(a[k].train.labels().begin(), a[k].train.labels().end(),
                     b[k].train.labels().begin(), b[k].train.labels().end()));
  }
}

TEST_CASE("shard registry serves immutable shards") {
  ShardRegistry reg;
  const Dataset ds = test::random_dataset(60, 2, 3, 8);
  for (auto& p : partition_sorted_label(ds, 20)) reg.register_shard(p);
  CHECK(reg.list_shards().size() == 20);
  const auto a = reg.serve_shard(shard_name(3));
  const auto b = reg.serve_shard(shard_name(3));
  CHECK(a->train.features() == b->train.features());
  CHECK_THROWS_AS(reg.serve_shard("nope"), NotFound);
  CHECK_THROWS_AS(reg.register_shard(*a), InvalidArgument);

  reg.set_fetch_latency(0.25);
  CHECK(reg.fetch(shard_name(0)).latency_s == 0.25);
  reg.set_fetch_latency(shard_name(1), 1.0);
  CHECK(reg.fetch(shard_name(1)).latency_s == 1.0);
  CHECK(reg.fetch(shard_name(1)).bytes > 0);
}

TEST_CASE("200 shards give 200 unique ids") {
  ShardRegistry reg;
  const Dataset ds = test::random_dataset(400, 1, 2, 1);
  for (auto& p : partition_iid(ds, 200, 0)) reg.register_shard(std::move(p));
  const auto ids = reg.list_shards();
  CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == 200);
}

TEST_CASE("shard files round-trip and detect corruption") {
  const auto dir = test::scratch_dir("shards");
  const Dataset ds = test::random_dataset(40, 3, 2, 5);
  Partition p = split_train_test(partition_iid(ds, 1, 0)[0], 0.25, 1);
  const ShardManifest man = write_shard(dir, p);
  CHECK(man.cardinality == 30);
  CHECK(man.test_cardinality == 10);
  const Partition back = read_shard(dir, p.shard_id);
  CHECK(back.train.features() == p.train.features());
  CHECK(back.test->features() == p.test->features());
  CHECK(load_shard_directory(dir)->list_shards() == std::vector<std::string>{p.shard_id});

  Bytes raw = read_file(dir / (p.shard_id + ".bin"));
  raw[raw.size() / 2] ^= 0x40;
  write_file_atomic(dir / (p.shard_id + ".bin"), raw);
  CHECK_THROWS_AS(read_shard(dir, p.shard_id), CorruptionError);
}
