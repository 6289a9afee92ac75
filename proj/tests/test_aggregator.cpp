#include <doctest.h>

#include <algorithm>
#include <random>

#include "faasfl/error.hpp"
#include "helpers.hpp"
#include "world.hpp"

using namespace faasfl;
using nlohmann::json;

namespace {

ClientResult cr(const std::string& id, std::vector<double> w, std::uint64_t n) {
  return {"s", 1, id, test::single(std::move(w)), n, std::nullopt};
}

std::vector<ClientResult> random_results(std::size_t k, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> card(1, 600);
  std::vector<ClientResult> out;
  for (std::size_t i = 0; i < k; ++i) {
    ParameterSet p;
    p.add("layer_0/kernel", test::random_tensor({dim}, rng));
    p.add("layer_0/bias", test::random_tensor({3}, rng));
    out.push_back({"s", 1, "c" + std::to_string(i), std::move(p), card(rng), std::nullopt});
  }
  return out;
}

// Batches over an in-memory vector, with gauge accounting like the store's stream.
BatchSource vector_source(const std::vector<ClientResult>& results, std::size_t batch,
                          ResidencyGauge* gauge, std::size_t& pos) {
  return [&results, batch, gauge, &pos]() -> std::optional<ResultBatch> {
    if (pos >= results.size()) return std::nullopt;
    ResultBatch b;
    const std::size_t end = std::min(results.size(), pos + batch);
    b.lease = GaugeLease(gauge, end - pos);
    for (; pos < end; ++pos) {
      b.results.push_back(results[pos]);
      b.encoded_bytes.push_back(0);
    }
    return b;
  };
}

ParameterSet running(const std::vector<ClientResult>& results, std::size_t batch,
                     ResidencyGauge* gauge = nullptr) {
  std::size_t pos = 0;
  return fedavg_running(vector_source(results, batch, gauge, pos), gauge).params;
}

// Independent arithmetic oracle: long double sums with Kahan compensation.
std::vector<long double> oracle(const std::vector<ClientResult>& results) {
  const std::size_t flat = results[0].params.flat_size();
  std::vector<long double> sum(flat, 0.0L), comp(flat, 0.0L);
  long double total = 0.0L;
  for (const auto& r : results) {
    total += static_cast<long double>(r.cardinality);
    std::size_t k = 0;
    for (const auto& e : r.params) {
      for (double v : e.tensor.data()) {
        const long double y = static_cast<long double>(r.cardinality) * v - comp[k];
        const long double t = sum[k] + y;
        comp[k] = (t - sum[k]) - y;
        sum[k] = t;
        ++k;
      }
    }
  }
  for (auto& s : sum) s /= total;
  return sum;
}

double max_rel_to_oracle(const ParameterSet& p, const std::vector<long double>& o) {
  double worst = 0.0;
  std::size_t k = 0;
  for (const auto& e : p) {
    for (double v : e.tensor.data()) {
      const long double ref = o[k++];
      const long double scale = std::max<long double>(1.0L, std::abs(ref));
      worst = std::max(worst, static_cast<double>(std::abs(v - ref) / scale));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("naive FedAvg is the cardinality-weighted mean") {
  std::vector<ClientResult> rs = {cr("a", {1.0}, 1), cr("b", {3.0}, 3)};
  CHECK(fedavg_naive(rs).tensor(0)[0] == doctest::Approx(2.5).epsilon(1e-15));

  std::vector<ClientResult> same = {cr("a", {0.7, -2.0}, 4), cr("b", {0.7, -2.0}, 9),
                                    cr("c", {0.7, -2.0}, 1)};
  CHECK(fedavg_naive(same) == same[0].params);

  const auto five = random_results(5, 6, 1);
  CHECK(max_rel_to_oracle(fedavg_naive(five), oracle(five)) < 1e-12);

  CHECK_THROWS_AS(fedavg_naive({}), InvalidArgument);
  std::vector<ClientResult> bad = {cr("a", {1.0}, 1), cr("odd-one", {1.0, 2.0}, 1)};
  try {
    fedavg_naive(bad);
    FAIL("expected ShapeMismatch");
  } catch (const ShapeMismatch& e) {
    CHECK(std::string(e.what()).find("odd-one") != std::string::npos);
  }
}

TEST_CASE("running average equals naive on randomized multisets") {
  std::mt19937_64 rng(5);
  for (std::size_t k : {1u, 2u, 7u, 50u, 200u}) {
    const auto rs = random_results(k, k == 200 ? 1000 : 40, k);
    const auto naive = fedavg_naive(rs);
    for (std::size_t batch : {1u, 3u, 20u, 500u}) {
      CHECK(test::max_abs_diff(running(rs, batch), naive) < 1e-9);
    }
  }
  // Large parameter vectors too.
  const auto big = random_results(4, 100000, 9);
  CHECK(test::max_abs_diff(running(big, 2), fedavg_naive(big)) < 1e-9);
}

TEST_CASE("running average: 200 results in batches of 20 keep at most 21 resident") {
  const auto rs = random_results(200, 50, 3);
  ResidencyGauge gauge;
  const auto p = running(rs, 20, &gauge);
  CHECK(test::max_abs_diff(p, fedavg_naive(rs)) < 1e-9);
  CHECK(gauge.peak() <= 21);
  CHECK(gauge.peak() >= 20);
  CHECK(gauge.current() == 0);
  for (std::size_t b : {1u, 5u, 64u}) {
    ResidencyGauge g;
    running(rs, b, &g);
    CHECK(g.peak() <= b + 1);
  }
}

TEST_CASE("aggregation is permutation invariant") {
  auto rs = random_results(60, 30, 11);
  const auto ref = fedavg_naive(rs);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(rs.begin(), rs.end(), rng);
    CHECK(test::max_abs_diff(fedavg_naive(rs), ref) < 1e-9);
    CHECK(test::max_abs_diff(running(rs, 7), ref) < 1e-9);
  }
}

TEST_CASE("scaling every cardinality leaves the aggregate exactly unchanged") {
  const auto rs = random_results(25, 20, 4);
  const auto naive = fedavg_naive(rs);
  const auto run = running(rs, 6);
  for (std::uint64_t c : {2u, 3u, 1000u}) {
    auto scaled = rs;
    for (auto& r : scaled) r.cardinality *= c;
    CHECK(fedavg_naive(scaled) == naive);
    CHECK(running(scaled, 6) == run);
  }
}

TEST_CASE("adversarial magnitudes match a compensated-summation oracle") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> expo(-8.0, 8.0);
  std::vector<ClientResult> rs;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> w(16);
    for (double& v : w) v = (rng() % 2 ? 1.0 : -1.0) * std::pow(10.0, expo(rng));
    rs.push_back(cr("c" + std::to_string(i), w, 1 + rng() % 1000));
  }
  const auto o = oracle(rs);
  CHECK(max_rel_to_oracle(fedavg_naive(rs), o) < 1e-6);
  CHECK(max_rel_to_oracle(running(rs, 1), o) < 1e-6);
  CHECK(max_rel_to_oracle(running(rs, 20), o) < 1e-6);
}

TEST_CASE("zero cardinality and empty streams are errors") {
  RunningAverage avg;
  CHECK_THROWS_AS(avg.add(test::single({1.0}), 0, "z"), InvalidArgument);
  std::vector<ClientResult> none;
  std::size_t pos = 0;
  CHECK_THROWS_AS(fedavg_running(vector_source(none, 3, nullptr, pos)), InvalidArgument);
  std::vector<ClientResult> zero = {cr("a", {1.0}, 0)};
  CHECK_THROWS_AS(fedavg_naive(zero), InvalidArgument);
}

namespace {

void upload_results(test::World& w, std::uint64_t round, const std::vector<ClientResult>& rs) {
  w.store->open_round(w.admin(), w.session, round);
  for (auto r : rs) {
    r.session_id = w.session;
    r.round = round;
    w.store->put_client_result(w.admin(), r);
  }
}

}  // namespace

TEST_CASE("aggregator handler commits the new global model") {
  test::World w(ModelSpec::logistic_regression(4, 3));
  w.deploy_aggregator();
  const auto init = initialize_parameters(w.model, 0);
  w.store->put_global_model(w.admin(), w.session, init);
  std::vector<ClientResult> rs;
  for (int i = 0; i < 9; ++i) {
    rs.push_back({"s", 1, "c" + std::to_string(i), initialize_parameters(w.model, 10 + i),
                  static_cast<std::uint64_t>(5 + i), std::nullopt});
  }
  upload_results(w, 1, rs);
  const auto r = w.fabric->invoke("aggregator", w.aggregate_request(1, 4), {.at = 0.0});
  REQUIRE(r.ok());
  CHECK(r.response->at("version") == 1);
  CHECK(r.response->at("results") == 9);
  CHECK(r.response->at("peak_resident").get<std::size_t>() <= 5);
  const auto g = w.store->get_global_model(w.admin(), w.session);
  CHECK(g.version == 1);
  CHECK(test::max_abs_diff(g.params, fedavg_naive(rs)) < 1e-9);
  CHECK(r.record.role == "aggregator");
}

TEST_CASE("single-client round yields that client's params") {
  test::World w(ModelSpec::logistic_regression(4, 3));
  w.deploy_aggregator();
  w.store->put_global_model(w.admin(), w.session, initialize_parameters(w.model, 0));
  const auto only = initialize_parameters(w.model, 5);
  upload_results(w, 1, {{"s", 1, "solo", only, 17, std::nullopt}});
  const auto r = w.fabric->invoke("aggregator", w.aggregate_request(1, 20), {.at = 0.0});
  REQUIRE(r.ok());
  CHECK(w.store->get_global_model(w.admin(), w.session).params == only);
}

TEST_CASE("aggregator honours accepted_clients and central evaluation") {
  test::World w(ModelSpec::logistic_regression(4, 3));
  w.deploy_aggregator();
  w.store->put_global_model(w.admin(), w.session, initialize_parameters(w.model, 0));
  std::vector<ClientResult> rs;
  for (int i = 0; i < 4; ++i) {
    rs.push_back({"s", 1, "c" + std::to_string(i), initialize_parameters(w.model, 20 + i), 10,
                  std::nullopt});
  }
  upload_results(w, 1, rs);
  Partition central = partition_iid(test::random_dataset(50, 4, 3, 1), 1, 0)[0];
  central.shard_id = "central-test";
  w.shards->register_shard(central);

  auto req = w.aggregate_request(1, 2);
  req["accepted_clients"] = {"c0", "c2"};
  req["central_test"] = "central-test";
  const auto r = w.fabric->invoke("aggregator", req, {.at = 0.0});
  REQUIRE(r.ok());
  CHECK(r.response->at("results") == 2);
  const std::vector<ClientResult> kept = {rs[0], rs[2]};
  const auto expected = fedavg_naive(kept);
  const auto g = w.store->get_global_model(w.admin(), w.session);
  CHECK(test::max_abs_diff(g.params, expected) < 1e-12);
  const Metrics m = evaluate(w.model, g.params, central.train.features(), central.train.labels());
  CHECK(r.response->at("metrics").at("accuracy").get<double>() == m.accuracy);
  CHECK(r.response->at("metrics").at("loss").get<double>() == m.loss);
  CHECK(r.response->at("timing").at("eval_s").get<double>() > 0.0);
}

TEST_CASE("aggregation without results fails; client tokens cannot aggregate") {
  test::World w(ModelSpec::logistic_regression(4, 3));
  w.deploy_aggregator();
  w.store->put_global_model(w.admin(), w.session, initialize_parameters(w.model, 0));
  w.store->open_round(w.admin(), w.session, 1);
  const auto r = w.fabric->invoke("aggregator", w.aggregate_request(1, 5), {.at = 0.0});
  CHECK(r.record.outcome == Outcome::kHandlerError);

  auto req = w.aggregate_request(1, 5);
  req["token"] = w.auth->sign("controller", {"invoke:clients"}, 60).encoded;
  CHECK(w.fabric->invoke("aggregator", req, {.at = 0.0}).record.outcome == Outcome::kAuthReject);
}

TEST_CASE("naive mode runs out of memory where running mode fits") {
  // 200 results of 1e5 parameters: 800 KB each, 160 MB all at once.
  test::World w(ModelSpec::logistic_regression(999, 100));  // 99,900 + 100 = 100,000 params
  w.deploy_aggregator("aggregator", 64);
  w.store->put_global_model(w.admin(), w.session, initialize_parameters(w.model, 0));
  std::vector<ClientResult> rs;
  const auto base = initialize_parameters(w.model, 1);
  for (int i = 0; i < 200; ++i) rs.push_back({"s", 1, "c" + std::to_string(i), base, 10, std::nullopt});
  upload_results(w, 1, rs);
  const auto naive = w.fabric->invoke("aggregator", w.aggregate_request(1, 20, "naive"), {.at = 0.0});
  CHECK(naive.record.outcome == Outcome::kOom);
  CHECK(w.store->latest_version(w.session) == 0u);  // nothing committed
  const auto run = w.fabric->invoke("aggregator", w.aggregate_request(1, 20, "running"), {.at = 100.0});
  CHECK(run.record.outcome == Outcome::kOk);
  CHECK(run.response->at("peak_resident").get<std::size_t>() <= 21);
  CHECK(run.record.peak_tracked_bytes <= 21u * 800'000u);
  CHECK(naive.record.peak_tracked_bytes > run.record.peak_tracked_bytes);
}
