#include <doctest.h>

#include <fstream>
#include <set>

#include <atomic>
#include <thread>

#include "faasfl/error.hpp"
#include "faasfl/fabric.hpp"
#include "helpers.hpp"

using namespace faasfl;
using nlohmann::json;

namespace {

FunctionDeployment dep(const std::string& id, double cold = 2.0) {
  FunctionDeployment d;
  d.function_id = id;
  d.cold_start = ColdStartProfile{ColdStartProfile::Kind::kConstant, cold, 0.0};
  return d;
}

Handler sleeper(double s) {
  return [s](InvocationContext& ctx, const json&) {
    ctx.sleep(s);
    return json{{"ok", true}};
  };
}

}  // namespace

TEST_CASE("first invocation is cold, the next one warm") {
  Fabric fabric;
  fabric.deploy(dep("f"), sleeper(1.0));
  const auto a = fabric.invoke("f", json::object(), {.at = 0.0});
  CHECK(a.record.cold);
  CHECK(a.record.duration_s == doctest::Approx(3.0));
  const auto b = fabric.invoke("f", json::object(), {.at = a.record.duration_s});
  CHECK_FALSE(b.record.cold);
  CHECK(b.record.duration_s == doctest::Approx(1.0));
  CHECK(b.record.instance_id == a.record.instance_id);
  CHECK(b.response->at("ok") == true);
  CHECK_THROWS_AS(fabric.invoke("missing", json::object()), NotFound);
  CHECK_THROWS_AS(fabric.deploy(dep("f"), sleeper(1.0)), InvalidArgument);
}

TEST_CASE("timeouts and memory limits select the outcome") {
  Fabric fabric;
  auto d = dep("slow", 0.0);
  d.timeout_s = 5.0;
  fabric.deploy(d, sleeper(6.0));
  const auto t = fabric.invoke("slow", json::object(), {.at = 0.0});
  CHECK(t.record.outcome == Outcome::kTimeout);
  CHECK_FALSE(t.response.has_value());
  CHECK(t.record.duration_s == 5.0);

  auto m = dep("hungry", 0.0);
  m.memory_limit_mb = 1;
  fabric.deploy(m, [](InvocationContext& ctx, const json&) {
    auto lease = ctx.memory().allocate(600 * 1024, "a");
    auto lease2 = ctx.memory().allocate(600 * 1024, "b");
    return json{};
  });
  const auto o = fabric.invoke("hungry", json::object(), {.at = 0.0});
  CHECK(o.record.outcome == Outcome::kOom);
  CHECK(o.record.peak_tracked_bytes == 600 * 1024);
  CHECK(fabric.instance_count("hungry") == 0);  // an OOM kills the instance

  fabric.deploy(dep("broken", 0.0), [](InvocationContext&, const json&) -> json {
    throw std::runtime_error("boom");
  });
  const auto h = fabric.invoke("broken", json::object(), {.at = 0.0});
  CHECK(h.record.outcome == Outcome::kHandlerError);
  CHECK(h.error == "boom");
}

TEST_CASE("ok outcomes never exceed the timeout") {
  Fabric fabric;
  auto d = dep("edge", 1.0);
  d.timeout_s = 3.0;
  fabric.deploy(d, sleeper(2.0));  // cold 1 + 2 = exactly the timeout
  const auto r = fabric.invoke("edge", json::object(), {.at = 0.0});
  CHECK(r.record.outcome == Outcome::kOk);
  CHECK(r.record.duration_s <= d.timeout_s);
}

TEST_CASE("25 concurrent invocations scale out to 25 cold instances") {
  Fabric fabric;
  fabric.deploy(dep("f"), sleeper(1.0));
  std::vector<InvocationRecord> recs(25);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 25; ++i) {
      threads.emplace_back([&, i] { recs[i] = fabric.invoke("f", json::object(), {.at = 10.0}).record; });
    }
  }
  std::set<std::string> ids;
  for (const auto& r : recs) {
    CHECK(r.cold);
    ids.insert(r.instance_id);
  }
  CHECK(ids.size() == 25);
  CHECK(fabric.instance_count("f") == 25);
  CHECK(fabric.records().size() == 25);  // nothing dropped
}

TEST_CASE("burst of invocations yields exactly one record each") {
  Fabric fabric;
  fabric.deploy(dep("f", 0.1), sleeper(0.5));
  fabric.deploy(dep("g", 0.1), [](InvocationContext& ctx, const json& r) -> json {
    if (r.at("i").get<int>() % 3 == 0) throw std::runtime_error("odd");
    ctx.sleep(0.2);
    return json{};
  });
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 25; ++i) {
          fabric.invoke(i % 2 ? "f" : "g", json{{"i", i}}, {.at = static_cast<double>(t)});
        }
      });
    }
  }
  const auto recs = fabric.records();
  CHECK(recs.size() == 200);
  double sum = 0.0;
  for (const auto& r : recs) sum += r.duration_s;
  CHECK(std::abs(sum - fabric.busy_time()) <= 1e-9);
}

TEST_CASE("namespace cache computes once per warm instance") {
  Fabric fabric;
  auto d = dep("f", 0.5);
  d.keep_warm_s = 100.0;
  std::atomic<int> computes{0};
  fabric.deploy(d, [&](InvocationContext& ctx, const json& req) {
    const std::string key = req.at("key");
    auto v = cached<std::string>(ctx.cache(), key, [&] {
      ++computes;
      return key + "!";
    });
    return json{{"v", *v}};
  });
  double t = 0.0;
  auto call = [&](const std::string& key) {
    auto r = fabric.invoke("f", json{{"key", key}}, {.at = t});
    t += r.record.duration_s + 1.0;
    return r;
  };
  call("A");
  CHECK(call("A").response->at("v") == "A!");
  CHECK(computes == 1);

  // Cold start after reclaim recomputes.
  t += 200.0;
  CHECK(fabric.reclaim_idle(t) == 1);
  CHECK(call("A").record.cold);
  CHECK(computes == 2);
}

TEST_CASE("LRU capacity 1 with keys A, B, A recomputes A") {
  Fabric fabric;
  auto d = dep("f", 0.0);
  d.cache_capacity = 1;
  std::map<std::string, int> computes;
  fabric.deploy(d, [&](InvocationContext& ctx, const json& req) {
    const std::string key = req.at("key");
    cached<int>(ctx.cache(), key, [&] { return ++computes[key]; });
    return json{};
  });
  double t = 0.0;
  for (const char* k : {"A", "B", "A"}) {
    fabric.invoke("f", json{{"key", k}}, {.at = t});
    t += 1.0;
  }
  CHECK(computes["A"] == 2);
  CHECK(computes["B"] == 1);

  LruCache<int, int> lru(2);
  lru.put(1, 1);
  lru.put(2, 2);
  lru.get(1);  // refresh 1, so 2 is the eviction victim
  lru.put(3, 3);
  CHECK(lru.contains(1));
  CHECK_FALSE(lru.contains(2));
  CHECK(lru.size() <= lru.capacity());
}

TEST_CASE("reclaim: 200 instances, half idle past keep-warm") {
  Fabric fabric;
  auto d = dep("f", 0.0);
  d.keep_warm_s = 300.0;
  fabric.deploy(d, [](InvocationContext& ctx, const json& req) {
    ctx.sleep(req.at("s").get<double>());
    return json{};
  });
  {
    std::vector<std::jthread> threads;
    // 100 long-running invocations stay in use until t=400.
    for (int i = 0; i < 100; ++i) {
      threads.emplace_back([&] { fabric.invoke("f", json{{"s", 400.0}}, {.at = 0.0}); });
    }
  }
  {
    std::vector<std::jthread> threads;
    // Another 100 start at t=10 while the first batch is still busy; idle from t=11.
    for (int i = 0; i < 100; ++i) {
      threads.emplace_back([&] { fabric.invoke("f", json{{"s", 1.0}}, {.at = 10.0}); });
    }
  }
  CHECK(fabric.instance_count("f") == 200);
  CHECK(fabric.reclaim_idle(311.0) == 100);
  CHECK(fabric.instance_count("f") == 100);
}

TEST_CASE("a busy instance is never reclaimed mid-invocation") {
  auto fabric = std::make_shared<Fabric>();
  auto d = dep("f", 0.0);
  d.keep_warm_s = 0.0;
  std::size_t reclaimed = 99;
  fabric->deploy(d, [&](InvocationContext& ctx, const json&) {
    reclaimed = fabric->reclaim_idle(1e9);
    ctx.sleep(1.0);
    return json{};
  });
  const auto r = fabric->invoke("f", json::object(), {.at = 0.0});
  CHECK(reclaimed == 0);
  CHECK(r.ok());
}

TEST_CASE("warm invocations save at least the cached work") {
  Fabric fabric;
  auto d = dep("f", 1.0);
  const double delta = 3.0;
  fabric.deploy(d, [&](InvocationContext& ctx, const json&) {
    if (!ctx.cache().contains("data")) {
      ctx.sleep(delta);
      ctx.cache().put("data", 1);
    }
    ctx.sleep(0.5);
    return json{};
  });
  double cold_sum = 0, warm_sum = 0;
  int cold_n = 0, warm_n = 0;
  double t = 0;
  for (int i = 0; i < 20; ++i) {
    if (i % 5 == 0) t += 1000.0;  // keep-warm expiry forces a cold start
    const auto r = fabric.invoke("f", json::object(), {.at = t});
    t += r.record.duration_s;
    (r.record.cold ? cold_sum : warm_sum) += r.record.duration_s;
    ++(r.record.cold ? cold_n : warm_n);
  }
  CHECK(cold_n == 4);
  CHECK(cold_sum / cold_n - warm_sum / warm_n >= 0.9 * delta);
}

TEST_CASE("billing rounds up to the granularity") {
  CHECK(billed_duration(0.001, 0.1) == doctest::Approx(0.1));
  CHECK(billed_duration(4.21, 0.1) == doctest::Approx(4.3));
  CHECK(billed_duration(0.3, 0.1) == doctest::Approx(0.3));
  CHECK(billed_duration(0.0, 0.1) == 0.0);
  CHECK(billed_duration(0.0004, 0.001) == doctest::Approx(0.001));

  InvocationRecord r;
  r.duration_s = 4.21;
  r.memory_limit_mb = 2048;
  r.cpu_ghz = 2.4;
  r.egress_bytes = 1000;
  const std::vector<InvocationRecord> one = {r};
  const auto s = billing_summary(one, 0.1);
  CHECK(s.invocations == 1);
  CHECK(s.gb_seconds == doctest::Approx(8.6));
  CHECK(s.ghz_seconds == doctest::Approx(2.4 * 4.3));
  CHECK(s.egress_bytes == 1000);
  const auto z = billing_summary({}, 0.1);
  CHECK(z.invocations == 0);
  CHECK(z.gb_seconds == 0.0);
  CHECK(z.ghz_seconds == 0.0);
  CHECK(z.egress_bytes == 0);
}

TEST_CASE("cpu tier follows the memory limit") {
  Fabric fabric;
  auto d = dep("f");
  d.memory_limit_mb = 2048;
  CHECK(fabric.cpu_ghz_for(d) == 2.4);
  d.memory_limit_mb = 1536;
  CHECK(fabric.cpu_ghz_for(d) == 2.4);
  d.cpu_ghz = 1.0;
  CHECK(fabric.cpu_ghz_for(d) == 1.0);
}

TEST_CASE("heterogeneous platforms apply their own profiles") {
  Fabric fabric;
  fabric.add_platform({"slowcloud", {ColdStartProfile::Kind::kConstant, 7.0, 0.0}, 1e6, 1.0, 0.25});
  auto d = dep("f");
  d.cold_start.reset();
  d.platform_label = "slowcloud";
  fabric.deploy(d, [](InvocationContext& ctx, const json&) {
    ctx.transfer(2'000'000);
    return json{};
  });
  const auto r = fabric.invoke("f", json::object(), {.at = 0.0});
  CHECK(r.record.cold_start_s == 7.0);
  CHECK(r.record.duration_s == doctest::Approx(7.0 + 0.25 + 2.0));
  auto bad = dep("g");
  bad.platform_label = "unknown";
  CHECK_THROWS(fabric.deploy(bad, sleeper(0)));
}

TEST_CASE("seeded cold-start distributions are reproducible") {
  for (auto kind : {ColdStartProfile::Kind::kUniform, ColdStartProfile::Kind::kLogNormal}) {
    ColdStartProfile p{kind, 1.0, 2.0};
    if (kind == ColdStartProfile::Kind::kLogNormal) p.b = 0.5;
    std::mt19937_64 a(3), b(3);
    for (int i = 0; i < 20; ++i) {
      const double x = p.sample(a);
      CHECK(x == p.sample(b));
      CHECK(x >= 0.0);
      if (kind == ColdStartProfile::Kind::kUniform) CHECK((x >= 1.0 && x <= 2.0));
    }
  }
}

TEST_CASE("invocation records round-trip through CSV") {
  Fabric fabric;
  fabric.deploy(dep("f"), sleeper(0.123));
  fabric.invoke("f", json::object(), {.at = 0.0, .round = 4});
  const auto path = test::scratch_dir("records") / "trace.csv";
  const auto recs = fabric.records();
  write_records_csv(path, recs);
  const auto back = read_records_csv(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].function_id == "f");
  CHECK(back[0].cold);
  CHECK(back[0].duration_s == recs[0].duration_s);
  CHECK(back[0].billed_s == recs[0].billed_s);
  CHECK(back[0].round == 4);
  CHECK(back[0].outcome == Outcome::kOk);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("function_id,cold,duration_s,outcome,billed_s", 0) == 0);
}
