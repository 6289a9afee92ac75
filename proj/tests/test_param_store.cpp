#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <set>
#include <thread>

#include "faasfl/error.hpp"
#include "faasfl/param_store.hpp"
#include "faasfl/serialize.hpp"
#include "helpers.hpp"

using namespace faasfl;

namespace {

ParameterSet params_of_bytes(std::size_t approx_bytes, double fill) {
  ParameterSet p;
  const std::size_t n = approx_bytes / 8;
  p.add("w", Tensor({n}, std::vector<double>(n, fill)));
  return p;
}

ClientResult result(const std::string& session, std::uint64_t round, const std::string& client,
                    double value, std::uint64_t n = 10) {
  return {session, round, client, test::single({value, -value}), n, std::nullopt};
}

std::size_t count_files(const std::filesystem::path& dir, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().filename().string().rfind(prefix, 0) == 0) ++n;
  }
  return n;
}

struct Fixture {
  std::shared_ptr<SimClock> clock = std::make_shared<SimClock>(100.0);
  ParameterStore store{StoreOptions{}, clock};
  const StoreCredential& admin = store.admin_credential();
};

}  // namespace

TEST_CASE("document size limit is enforced on write") {
  MemoryBackend backend(16);
  const Bytes ok(16, 1), big(17, 1);
  backend.put("a", ok);
  CHECK_THROWS_AS(backend.put("b", big), DocumentTooLarge);
  CHECK(backend.get("b") == nullptr);
}

TEST_CASE("chunking round-trips random blobs from 1 byte to 3x the limit") {
  const std::size_t limit = 1024;
  MemoryBackend backend(limit);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> byte(0, 255);
  for (std::size_t size : {1u, 2u, 1023u, 1024u, 1025u, 2047u, 2048u, 2049u, 3071u, 3072u}) {
    Bytes payload(size);
    for (auto& b : payload) b = static_cast<std::uint8_t>(byte(rng));
    const std::string id = "blob" + std::to_string(size);
    const auto blob = write_chunked(backend, id, payload,
                                    [&](std::size_t k) { return id + "/" + std::to_string(k); });
    CHECK(blob.chunk_ids.size() == (size + limit - 1) / limit);
    for (const auto& c : blob.chunk_ids) CHECK(backend.get(c)->size() <= limit);
    CHECK(read_chunked(backend, blob) == payload);
  }
  // A damaged chunk is detected by the checksum.
  Bytes payload(1500, 7);
  auto blob = write_chunked(backend, "x", payload, [](std::size_t k) { return "x/" + std::to_string(k); });
  Bytes bad(476, 8);
  backend.put("x/1", bad);
  CHECK_THROWS_AS(read_chunked(backend, blob), CorruptionError);
}

TEST_CASE("global models: 2.3 MB in one chunk, 26.4 MB in two") {
  const auto dir = test::scratch_dir("store-chunks");
  ParameterStore store(StoreOptions{kDefaultDocSizeLimit, dir});
  const auto& admin = store.admin_credential();

  const auto small = params_of_bytes(2'300'000, 0.25);
  CHECK(store.put_global_model(admin, "s", small) == 0);
  CHECK(count_files(dir / "sessions/s/global/0", "chunk_") == 1);

  const auto large = params_of_bytes(26'400'000, -1.5);
  CHECK(store.put_global_model(admin, "s", large) == 1);
  CHECK(count_files(dir / "sessions/s/global/1", "chunk_") == 2);
  const GlobalModel back = store.get_global_model(admin, "s");
  CHECK(back.version == 1);
  CHECK(encode_parameters(back.params) == encode_parameters(large));
}

TEST_CASE("global model versioning and access rules") {
  Fixture f;
  auto& store = f.store;
  const auto p0 = test::single({1.0, 2.0});
  const auto p1 = test::single({3.0, 4.0});
  const auto p2 = test::single({5.0, 6.0});
  CHECK(store.put_global_model(f.admin, "s", p0) == 0);
  CHECK(store.put_global_model(f.admin, "s", p1) == 1);
  CHECK(store.put_global_model(f.admin, "s", p2) == 2);
  const auto g = store.get_global_model(f.admin, "s");
  CHECK(g.version == 2);
  CHECK(g.params == p2);

  const auto client = store.issue_credential(f.admin, StoreScope::client("s", "c1"), 60);
  const auto other = store.issue_credential(f.admin, StoreScope::client("t", "c1"), 60);
  const auto agg = store.issue_credential(f.admin, StoreScope::aggregator("s"), 60);
  CHECK(store.get_global_model(client, "s").params == p2);
  CHECK_THROWS_AS(store.put_global_model(client, "s", p0), AuthorizationError);
  CHECK_THROWS_AS(store.get_global_model(other, "s"), AuthorizationError);
  CHECK(store.put_global_model(agg, "s", p0) == 3);
  CHECK_THROWS_AS(store.put_global_model(agg, "t", p0), AuthorizationError);
  CHECK_THROWS_AS(store.issue_credential(client, StoreScope::client("s", "c2"), 60),
                  AuthorizationError);
}

TEST_CASE("credentials expire and can be revoked") {
  Fixture f;
  f.store.put_global_model(f.admin, "s", test::single({1.0}));
  const auto c = f.store.issue_credential(f.admin, StoreScope::client("s", "c1"), 10);
  CHECK_NOTHROW(f.store.get_global_model(c, "s"));
  f.clock->advance(10.0);
  CHECK_THROWS_AS(f.store.get_global_model(c, "s"), AuthenticationError);

  const auto d = f.store.issue_credential(f.admin, StoreScope::client("s", "c2"), 10);
  CHECK_NOTHROW(f.store.get_global_model(d, "s"));
  f.store.revoke_credential(f.admin, d.principal);
  CHECK_THROWS_AS(f.store.get_global_model(d, "s"), AuthenticationError);

  StoreCredential forged = f.store.issue_credential(f.admin, StoreScope::client("s", "c3"), 10);
  forged.scope = StoreScope::admin();  // the store trusts its own record, not the caller's copy
  CHECK_THROWS_AS(f.store.put_global_model(forged, "s", test::single({2.0})), AuthorizationError);
  forged.secret = "guess";
  CHECK_THROWS_AS(f.store.get_global_model(forged, "s"), AuthenticationError);
}

TEST_CASE("isolation holds exhaustively for 10 principals") {
  Fixture f;
  auto& store = f.store;
  store.put_global_model(f.admin, "s", test::single({0.0, 0.0}));
  store.open_round(f.admin, "s", 1);
  std::vector<StoreCredential> creds;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "c" + std::to_string(i);
    creds.push_back(store.issue_credential(f.admin, StoreScope::client("s", id), 600));
    store.put_client_result(creds.back(), result("s", 1, id, i));
  }
  for (int i = 0; i < 10; ++i) {
    CHECK_THROWS_AS(store.put_global_model(creds[i], "s", test::single({1.0, 1.0})),
                    AuthorizationError);
    CHECK_THROWS_AS(store.list_round_results(creds[i], "s", 1), AuthorizationError);
    for (int j = 0; j < 10; ++j) {
      const std::string cj = "c" + std::to_string(j);
      // A client cannot even read its own result back.
      CHECK_THROWS_AS(store.get_client_result(creds[i], "s", 1, cj), AuthorizationError);
      if (i != j) {
        CHECK_THROWS_AS(store.put_client_result(creds[i], result("s", 1, cj, 99)),
                        AuthorizationError);
      }
    }
  }
  const auto agg = store.issue_credential(f.admin, StoreScope::aggregator("s"), 600);
  CHECK(store.list_round_results(agg, "s", 1).size() == 10);
  CHECK(store.get_client_result(agg, "s", 1, "c3").params == test::single({3.0, -3.0}));
}

TEST_CASE("client results: idempotent overwrite, stale rounds rejected") {
  Fixture f;
  auto& store = f.store;
  store.put_global_model(f.admin, "s", test::single({0.0, 0.0}));
  store.open_round(f.admin, "s", 2);
  const auto c = store.issue_credential(f.admin, StoreScope::client("s", "a"), 600);
  store.put_client_result(c, result("s", 2, "a", 1.0));
  store.put_client_result(c, result("s", 2, "a", 1.0));
  const auto agg = store.issue_credential(f.admin, StoreScope::aggregator("s"), 600);
  CHECK(store.list_round_results(agg, "s", 2) == std::vector<std::string>{"a"});
  CHECK_THROWS_AS(store.put_client_result(c, result("s", 1, "a", 1.0)), StaleRound);
  store.open_round(f.admin, "s", 3);
  CHECK_THROWS_AS(store.put_client_result(c, result("s", 2, "a", 1.0)), StaleRound);
  CHECK_THROWS_AS(store.put_client_result(c, result("s", 3, "a", 1.0, 0)), InvalidArgument);
  ClientResult wrong = result("s", 3, "a", 1.0);
  wrong.params = test::single({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(store.put_client_result(c, wrong), ShapeMismatch);
}

TEST_CASE("streaming yields every result once in bounded batches") {
  Fixture f;
  auto& store = f.store;
  store.put_global_model(f.admin, "s", test::single({0.0, 0.0}));
  store.open_round(f.admin, "s", 1);
  for (int i = 0; i < 7; ++i) {
    const std::string id = "c" + std::to_string(i);
    auto c = store.issue_credential(f.admin, StoreScope::client("s", id), 600);
    store.put_client_result(c, result("s", 1, id, i));
  }
  const auto agg = store.issue_credential(f.admin, StoreScope::aggregator("s"), 600);
  auto stream = store.stream_round_results(agg, "s", 1, 3);
  std::vector<std::size_t> sizes;
  std::set<std::string> seen;
  while (auto batch = stream.next()) {
    sizes.push_back(batch->results.size());
    for (const auto& r : batch->results) CHECK(seen.insert(r.client_id).second);
    CHECK(store.gauge().current() <= 3);
  }
  CHECK(sizes == std::vector<std::size_t>{3, 3, 1});
  const auto listed = store.list_round_results(agg, "s", 1);
  CHECK(seen == std::set<std::string>(listed.begin(), listed.end()));
  CHECK(store.gauge().peak() <= 3);
  CHECK(store.gauge().current() == 0);

  auto only = store.stream_round_results(agg, "s", 1, 10, std::set<std::string>{"c1", "c5"});
  CHECK(only.total() == 2);
  auto bad = store.issue_credential(f.admin, StoreScope::client("s", "c0"), 600);
  CHECK_THROWS_AS(store.stream_round_results(bad, "s", 1, 3), AuthorizationError);
}

TEST_CASE("200 results stream as 10 batches of 20") {
  Fixture f;
  auto& store = f.store;
  store.put_global_model(f.admin, "s", test::single({0.0, 0.0}));
  store.open_round(f.admin, "s", 1);
  for (int i = 0; i < 200; ++i) {
    const std::string id = "c" + std::to_string(i);
    store.put_client_result(f.admin, result("s", 1, id, i));
  }
  auto stream = store.stream_round_results(f.admin, "s", 1, 20);
  std::size_t batches = 0;
  while (auto b = stream.next()) {
    CHECK(b->results.size() == 20);
    ++batches;
  }
  CHECK(batches == 10);
  CHECK(store.gauge().peak() <= 20);
}

TEST_CASE("no torn reads under concurrent puts and gets") {
  ParameterStore store(StoreOptions{1024}, std::make_shared<SimClock>());
  const auto& admin = store.admin_credential();
  // Every model is constant-valued, so a mixed read would show two values.
  store.put_global_model(admin, "s", params_of_bytes(2000, 0.0));
  std::atomic<bool> done{false};
  std::atomic<int> torn{0}, reads{0};
  std::jthread writer([&] {
    for (int v = 1; v <= 40; ++v) store.put_global_model(admin, "s", params_of_bytes(2000, v));
    done = true;
  });
  std::vector<std::jthread> readers;
  for (int r = 0; r < 3; ++r) {
    readers.emplace_back([&] {
      while (!done) {
        const auto g = store.get_global_model(admin, "s");
        const auto d = g.params.tensor(0).data();
        if (!std::all_of(d.begin(), d.end(), [&](double x) { return x == d[0]; })) ++torn;
        if (d[0] != static_cast<double>(g.version)) ++torn;
        ++reads;
      }
    });
  }
  writer.join();
  readers.clear();
  CHECK(torn == 0);
  CHECK(store.get_global_model(admin, "s").version == 40);
}

TEST_CASE("budget counter is atomic and fails closed") {
  Fixture f;
  auto& store = f.store;
  const auto c = store.issue_credential(f.admin, StoreScope::client("s", "a"), 600);
  for (int i = 1; i <= 3; ++i) {
    const auto d = store.check_and_increment(c, "a", 3);
    CHECK(d.allowed);
    CHECK(d.count == static_cast<std::uint64_t>(i));
  }
  const auto before = store.state_hash();
  const auto denied = store.check_and_increment(c, "a", 3);
  CHECK_FALSE(denied.allowed);
  CHECK(denied.count == 3);
  CHECK(store.state_hash() == before);
  CHECK_THROWS_AS(store.check_and_increment(c, "b", 3), AuthorizationError);

  // Concurrent callers never overshoot the limit.
  const auto d2 = store.issue_credential(f.admin, StoreScope::client("s", "b"), 600);
  std::atomic<int> allowed{0};
  {
    std::vector<std::jthread> ts;
    for (int t = 0; t < 8; ++t) {
      ts.emplace_back([&] {
        for (int i = 0; i < 10; ++i) allowed += store.check_and_increment(d2, "b", 25).allowed;
      });
    }
  }
  CHECK(allowed == 25);
  CHECK(store.invocation_count("b") == 25);
}
