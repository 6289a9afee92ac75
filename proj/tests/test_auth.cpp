#include <doctest.h>

#include <chrono>
#include <random>

#include "faasfl/auth.hpp"
#include "faasfl/error.hpp"

using namespace faasfl;
using namespace faasfl::auth;

namespace {

struct Fixture {
  std::shared_ptr<SimClock> clock = std::make_shared<SimClock>(1000.0);
  std::shared_ptr<KeyDirectory> keys = std::make_shared<KeyDirectory>();
  AuthServer server{"issuer-a", keys, clock, 900.0, 5};
  ServerCredentials creds{"controller", "s3cret"};
  ClientAuthPolicy policy{"issuer-a", {std::string(kScopeInvokeClients)}, std::nullopt};

  Fixture() { server.register_server(creds, {std::string(kScopeInvokeClients)}); }
};

}  // namespace

TEST_CASE("fetched tokens carry their scopes and verify") {
  Fixture f;
  const auto t = f.server.fetch_token(f.creds);
  CHECK(t.scopes == std::set<std::string>{"invoke:clients"});
  CHECK(t.expiry == doctest::Approx(t.issued_at + 900.0));
  CHECK(t.issuer == "issuer-a");
  TokenVerifier v(f.keys);
  const auto res = v.validate(t.encoded, f.policy, f.clock->now());
  CHECK(res.accepted);
  CHECK(res.subject == "controller");

  CHECK_THROWS_AS(f.server.fetch_token({"controller", "wrong"}), AuthenticationError);
  CHECK_THROWS_AS(f.server.fetch_token({"nobody", "s3cret"}), AuthenticationError);

  const auto t2 = f.server.fetch_token(f.creds);
  CHECK(t2.encoded != t.encoded);
  CHECK(v.validate(t2.encoded, f.policy, f.clock->now()).accepted);
}

TEST_CASE("tokens are reproducible under a fixed seed and clock") {
  Fixture a, b;
  CHECK(a.server.fetch_token(a.creds).encoded == b.server.fetch_token(b.creds).encoded);
}

TEST_CASE("each rejection reason is reported") {
  Fixture f;
  TokenVerifier v(f.keys);
  const auto now = f.clock->now();
  const auto t = f.server.fetch_token(f.creds);

  std::string flipped = t.encoded;
  const auto dot = flipped.find('.');
  flipped[dot + 5] = flipped[dot + 5] == 'A' ? 'B' : 'A';
  CHECK(v.validate(flipped, f.policy, now).reason == RejectReason::kBadSignature);

  CHECK(v.validate(t.encoded, f.policy, t.expiry).reason == RejectReason::kExpired);
  CHECK(v.validate(t.encoded, f.policy, t.expiry - 1e-3).accepted);

  const auto eval_only = f.server.sign("controller", {"evaluate"}, 60);
  CHECK(v.validate(eval_only.encoded, f.policy, now).reason == RejectReason::kInsufficientScope);

  ClientAuthPolicy other = f.policy;
  other.trusted_issuer = "issuer-b";
  CHECK(v.validate(t.encoded, other, now).reason == RejectReason::kWrongIssuer);

  ClientAuthPolicy with_api = f.policy;
  with_api.extra_api_token = "k-123";
  CHECK(v.validate(t.encoded, with_api, now).reason == RejectReason::kMissingApiToken);
  CHECK(v.validate(t.encoded, with_api, now, "k-124").reason == RejectReason::kMissingApiToken);
  CHECK(v.validate(t.encoded, with_api, now, "k-123").accepted);

  CHECK(reject_reason_name(RejectReason::kInsufficientScope) == "insufficient_scope");
}

TEST_CASE("a token signed by a foreign key with the same issuer is rejected") {
  Fixture f;
  auto rogue_dir = std::make_shared<KeyDirectory>();
  AuthServer rogue("issuer-a", rogue_dir, f.clock, 900.0, 99);
  const auto forged = rogue.sign("controller", {"invoke:clients"}, 60);
  TokenVerifier v(f.keys);
  CHECK(v.validate(forged.encoded, f.policy, f.clock->now()).reason ==
        RejectReason::kBadSignature);
}

TEST_CASE("fuzzing 10000 random and mutated tokens yields no accepts") {
  Fixture f;
  TokenVerifier v(f.keys);
  const auto t = f.server.fetch_token(f.creds);
  std::mt19937_64 rng(2024);
  const std::string alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_.=+/";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::size_t accepts = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    if (i % 2 == 0) {
      s = t.encoded;
      const int edits = 1 + static_cast<int>(rng() % 3);
      for (int e = 0; e < edits; ++e) {
        std::uniform_int_distribution<std::size_t> pos(0, s.size() - 1);
        const std::size_t p = pos(rng);
        switch (rng() % 3) {
          case 0: {
            char c = alphabet[pick(rng)];
            if (c == s[p]) c = c == 'A' ? 'B' : 'A';
            s[p] = c;
            break;
          }
          case 1: s.erase(p, 1); break;
          default: s.insert(p, 1, alphabet[pick(rng)]); break;
        }
      }
      if (s == t.encoded) continue;
    } else {
      const std::size_t len = rng() % 300;
      for (std::size_t k = 0; k < len; ++k) s.push_back(alphabet[pick(rng)]);
    }
    if (v.validate(s, f.policy, f.clock->now()).accepted) ++accepts;
  }
  CHECK(accepts == 0);
}

TEST_CASE("completeness: every issued, unexpired, scoped token is accepted") {
  Fixture f;
  TokenVerifier v(f.keys);
  for (int i = 0; i < 200; ++i) {
    f.clock->advance(1.0);
    const auto t = f.server.fetch_token(f.creds);
    CHECK(v.validate(t.encoded, f.policy, f.clock->now()).accepted);
  }
}

TEST_CASE("warm verifier fetches each key once; rotation forces one refetch") {
  Fixture f;
  TokenVerifier v(f.keys);
  for (int i = 0; i < 5; ++i) {
    CHECK(v.validate(f.server.fetch_token(f.creds).encoded, f.policy, f.clock->now()).accepted);
  }
  CHECK(v.key_fetches() == 1);

  // A fresh verifier (cold instance) fetches again.
  const auto before = f.keys->fetch_count();
  TokenVerifier cold(f.keys);
  CHECK(cold.validate(f.server.fetch_token(f.creds).encoded, f.policy, f.clock->now()).accepted);
  CHECK(f.keys->fetch_count() == before + 1);

  f.server.rotate_key();
  for (int i = 0; i < 5; ++i) {
    CHECK(v.validate(f.server.fetch_token(f.creds).encoded, f.policy, f.clock->now()).accepted);
  }
  CHECK(v.key_fetches() == 2);
}

TEST_CASE("validation costs well under 5 ms") {
  Fixture f;
  TokenVerifier v(f.keys);
  const auto t = f.server.fetch_token(f.creds);
  v.validate(t.encoded, f.policy, f.clock->now());
  const int n = 200;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) CHECK(v.validate(t.encoded, f.policy, f.clock->now()).accepted);
  const double per = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / n;
  CHECK(per < 5e-3);
}
