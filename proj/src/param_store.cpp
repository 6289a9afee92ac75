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

#include "faasfl/param_store.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>

#include <json.hpp>

#include "faasfl/error.hpp"

namespace faasfl {
namespace {

using nlohmann::json;

std::span<const std::uint8_t> as_span(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string as_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

std::string session_prefix(const std::string& session) { return "sessions/" + session + "/"; }

std::string global_prefix(const std::string& session, std::uint64_t version) {
  return session_prefix(session) + "global/" + std::to_string(version) + "/";
}

std::string latest_key(const std::string& session) {
  return session_prefix(session) + "global/latest";
}

std::string results_prefix(const std::string& session, std::uint64_t round) {
  return session_prefix(session) + "results/" + std::to_string(round) + "/";
}

void check_identifier(const std::string& id, const char* what) {
  const bool ok = !id.empty() && id.size() <= 128 &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                           c == '.';
                  }) &&
                  id != "." && id != "..";
  if (!ok) throw InvalidArgument(std::string(what) + " '" + id + "' is not a valid identifier");
}

json blob_to_json(const ChunkedBlob& blob) {
  return {{"blob_id", blob.blob_id},
          {"chunk_ids", blob.chunk_ids},
          {"total_bytes", blob.total_bytes},
          {"checksum", crypto::to_hex(blob.checksum)}};
}

ChunkedBlob blob_from_json(const json& j) {
  ChunkedBlob blob;
  blob.blob_id = j.at("blob_id").get<std::string>();
  blob.chunk_ids = j.at("chunk_ids").get<std::vector<std::string>>();
  blob.total_bytes = j.at("total_bytes").get<std::size_t>();
  auto digest = crypto::digest_from_hex(j.at("checksum").get<std::string>());
  if (!digest) throw CorruptionError("malformed checksum in blob manifest '" + blob.blob_id + "'");
  blob.checksum = *digest;
  return blob;
}

json parse_doc(const Bytes& bytes, const std::string& key) {
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw CorruptionError("document '" + key + "' is not valid JSON: " + e.what());
  }
}

std::vector<std::pair<std::string, Shape>> layout_of(const ParameterSet& params) {
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& e : params) out.emplace_back(e.name, e.tensor.shape());
  return out;
}

}  // namespace

// --- backends --------------------------------------------------------------

void DocumentBackend::put(const std::string& key, std::span<const std::uint8_t> payload) {
  if (payload.size() > limit_) {
    throw DocumentTooLarge("document '" + key + "' is " + std::to_string(payload.size()) +
                           " bytes, limit is " + std::to_string(limit_));
  }
  store(key, payload);
}

std::shared_ptr<const Bytes> MemoryBackend::get(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = docs_.find(key);
  return it == docs_.end() ? nullptr : it->second;
}

std::vector<std::string> MemoryBackend::list(const std::string& prefix) const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (auto it = docs_.lower_bound(prefix); it != docs_.end() && it->first.starts_with(prefix); ++it) {
    out.push_back(it->first);
  }
  return out;
}

void MemoryBackend::store(const std::string& key, std::span<const std::uint8_t> payload) {
  auto doc = std::make_shared<const Bytes>(payload.begin(), payload.end());
  std::unique_lock lock(mu_);
  docs_[key] = std::move(doc);
}

DirectoryBackend::DirectoryBackend(std::filesystem::path root, std::size_t doc_size_limit)
    : DocumentBackend(doc_size_limit), root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::shared_ptr<const Bytes> DirectoryBackend::get(const std::string& key) const {
  const auto path = root_ / key;
  if (!std::filesystem::is_regular_file(path)) return nullptr;
  return std::make_shared<const Bytes>(read_file(path));
}

std::vector<std::string> DirectoryBackend::list(const std::string& prefix) const {
  std::vector<std::string> out;
  const auto slash = prefix.rfind('/');
  const auto base = slash == std::string::npos ? root_ : root_ / prefix.substr(0, slash);
  if (!std::filesystem::is_directory(base)) return out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(base)) {
    if (!entry.is_regular_file() || entry.path().extension() == ".tmp") continue;
    std::string key = std::filesystem::relative(entry.path(), root_).generic_string();
    if (key.starts_with(prefix)) out.push_back(std::move(key));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void DirectoryBackend::store(const std::string& key, std::span<const std::uint8_t> payload) {
  write_file_atomic(root_ / key, payload);
}

Bytes read_chunked(const DocumentBackend& backend, const ChunkedBlob& blob) {
  Bytes out;
  out.reserve(blob.total_bytes);
  for (const auto& id : blob.chunk_ids) {
    auto chunk = backend.get(id);
    if (!chunk) throw NotFound("chunk '" + id + "' of blob '" + blob.blob_id + "' is missing");
    if (chunk->size() > backend.doc_size_limit()) {
      throw CorruptionError("chunk '" + id + "' exceeds the document size limit");
    }
    out.insert(out.end(), chunk->begin(), chunk->end());
  }
  if (out.size() != blob.total_bytes) {
    throw CorruptionError("blob '" + blob.blob_id + "' has " + std::to_string(out.size()) +
                          " bytes, manifest says " + std::to_string(blob.total_bytes));
  }
  if (crypto::sha256(out) != blob.checksum) {
    throw CorruptionError("checksum mismatch for blob '" + blob.blob_id + "'");
  }
  return out;
}

// --- scopes ------------------------------------------------------------------

bool StoreScope::can_read_global(const std::string& s) const {
  return role == StoreRole::kAdmin || session == s;
}

bool StoreScope::can_write_global(const std::string& s) const {
  return role == StoreRole::kAdmin || (role == StoreRole::kAggregator && session == s);
}

bool StoreScope::can_write_result(const std::string& s, const std::string& client) const {
  return role == StoreRole::kAdmin ||
         (role == StoreRole::kClient && session == s && client_id == client);
}

bool StoreScope::can_read_results(const std::string& s) const {
  return role == StoreRole::kAdmin || (role == StoreRole::kAggregator && session == s);
}

bool StoreScope::can_use_counter(const std::string& client) const {
  return role == StoreRole::kAdmin || (role == StoreRole::kClient && client_id == client);
}

// --- gauge -------------------------------------------------------------------

void ResidencyGauge::acquire(std::size_t n) {
  const std::size_t now = current_.fetch_add(n) + n;
  std::size_t peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
}

void ResidencyGauge::release(std::size_t n) { current_.fetch_sub(n); }

// --- stream ------------------------------------------------------------------

std::optional<ResultBatch> ResultStream::next() {
  if (pos_ >= keys_.size()) return std::nullopt;
  const std::size_t n = std::min(batch_size_, keys_.size() - pos_);
  ResultBatch batch;
  batch.lease = GaugeLease(gauge_, n);
  batch.results.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.results.push_back(store_->load_result(keys_[pos_ + i]));
    batch.encoded_bytes.push_back(encoded_size(batch.results.back().params));
  }
  pos_ += n;
  return batch;
}

// --- store -------------------------------------------------------------------

ParameterStore::ParameterStore(StoreOptions options, std::shared_ptr<const Clock> clock)
    : clock_(std::move(clock)) {
  if (options.doc_size_limit == 0) throw InvalidArgument("doc_size_limit must be positive");
  if (options.directory) {
    backend_ = std::make_unique<DirectoryBackend>(*options.directory, options.doc_size_limit);
  } else {
    backend_ = std::make_unique<MemoryBackend>(options.doc_size_limit);
  }
  admin_.principal = "admin";
  admin_.secret = crypto::to_hex(crypto::random_bytes(32));
  admin_.scope = StoreScope::admin();
  admin_.expiry = std::numeric_limits<double>::infinity();
  credentials_.emplace(admin_.principal, CredentialRecord{admin_.secret, admin_.scope, admin_.expiry});
}

const StoreScope& ParameterStore::authenticate(const StoreCredential& cred) const {
  auto it = credentials_.find(cred.principal);
  if (it == credentials_.end()) {
    throw AuthenticationError("unknown or revoked principal '" + cred.principal + "'");
  }
  if (!crypto::secure_equal(it->second.secret, cred.secret)) {
    throw AuthenticationError("bad secret for principal '" + cred.principal + "'");
  }
  if (clock_->now() >= it->second.expiry) {
    throw AuthenticationError("credential for '" + cred.principal + "' has expired");
  }
  return it->second.scope;
}

StoreCredential ParameterStore::issue_credential(const StoreCredential& admin, StoreScope scope,
                                                 double ttl_s) {
  std::unique_lock lock(mu_);
  if (authenticate(admin).role != StoreRole::kAdmin) {
    throw AuthorizationError("only the admin may issue credentials");
  }
  if (scope.role != StoreRole::kAdmin) check_identifier(scope.session, "session");
  if (scope.role == StoreRole::kClient) check_identifier(scope.client_id, "client id");
  StoreCredential cred;
  const std::string n = std::to_string(next_principal_++);
  switch (scope.role) {
    case StoreRole::kAdmin: cred.principal = "admin-" + n; break;
    case StoreRole::kAggregator: cred.principal = "aggregator/" + scope.session + "/" + n; break;
    case StoreRole::kClient:
      cred.principal = "client/" + scope.session + "/" + scope.client_id + "/" + n;
      break;
  }
  cred.secret = crypto::to_hex(crypto::random_bytes(32));
  cred.scope = std::move(scope);
  cred.expiry = clock_->now() + ttl_s;
  credentials_.emplace(cred.principal, CredentialRecord{cred.secret, cred.scope, cred.expiry});
  return cred;
}

void ParameterStore::revoke_credential(const StoreCredential& admin, const std::string& principal) {
  std::unique_lock lock(mu_);
  if (authenticate(admin).role != StoreRole::kAdmin) {
    throw AuthorizationError("only the admin may revoke credentials");
  }
  if (principal == admin_.principal) throw InvalidArgument("the bootstrap admin cannot be revoked");
  credentials_.erase(principal);
}

ParameterStore::SessionState& ParameterStore::session_locked(const std::string& session) {
  auto it = sessions_.find(session);
  if (it != sessions_.end()) return it->second;
  SessionState state;
  // A directory-backed store may already hold this session from an earlier run.
  if (auto ptr = backend_->get(latest_key(session))) {
    state.latest = std::stoull(as_string(*ptr));
  }
  return sessions_.emplace(session, std::move(state)).first->second;
}

const ParameterStore::SessionState* ParameterStore::find_session_locked(
    const std::string& session) const {
  auto it = sessions_.find(session);
  return it == sessions_.end() ? nullptr : &it->second;
}

void ParameterStore::open_round(const StoreCredential& admin, const std::string& session,
                                std::uint64_t round) {
  std::unique_lock lock(mu_);
  if (authenticate(admin).role != StoreRole::kAdmin) {
    throw AuthorizationError("only the admin may open rounds");
  }
  check_identifier(session, "session");
  session_locked(session).round = round;
}

std::uint64_t ParameterStore::current_round(const std::string& session) const {
  std::shared_lock lock(mu_);
  const auto* s = find_session_locked(session);
  if (s == nullptr) throw NotFound("unknown session '" + session + "'");
  return s->round;
}

std::optional<std::uint64_t> ParameterStore::latest_version(const std::string& session) const {
  {
    std::shared_lock lock(mu_);
    if (const auto* s = find_session_locked(session)) {
      if (s->latest) return s->latest;
    }
  }
  if (auto ptr = backend_->get(latest_key(session))) return std::stoull(as_string(*ptr));
  return std::nullopt;
}

std::uint64_t ParameterStore::put_global_model(const StoreCredential& cred,
                                               const std::string& session,
                                               const ParameterSet& params) {
  std::mutex* commit_mu = nullptr;
  {
    std::unique_lock lock(mu_);
    if (!authenticate(cred).can_write_global(session)) {
      throw AuthorizationError("'" + cred.principal + "' may not write the global model of '" +
                               session + "'");
    }
    check_identifier(session, "session");
    commit_mu = session_locked(session).commit_mu.get();
  }
  if (params.empty()) throw InvalidArgument("refusing to store an empty model");
  if (!params.all_finite()) throw NonFiniteError("global model contains non-finite values");

  std::lock_guard commit(*commit_mu);
  std::uint64_t version = 0;
  {
    std::shared_lock lock(mu_);
    const auto* s = find_session_locked(session);
    version = s->latest ? *s->latest + 1 : 0;
  }

  const Bytes payload = encode_parameters(params);
  const std::string prefix = global_prefix(session, version);
  const ChunkedBlob blob = write_chunked(*backend_, prefix, payload, [&](std::size_t k) {
    return prefix + "chunk_" + std::to_string(k) + ".bin";
  });
  json manifest = blob_to_json(blob);
  manifest["version"] = version;
  backend_->put(prefix + "manifest.json", as_span(manifest.dump()));

  // Commit point: the pointer flips only after every chunk is stored.
  std::unique_lock lock(mu_);
  auto& s = session_locked(session);
  backend_->put(latest_key(session), as_span(std::to_string(version)));
  s.latest = version;
  s.layout = layout_of(params);
  return version;
}

GlobalModel ParameterStore::get_global_model(const StoreCredential& cred,
                                             const std::string& session) const {
  std::optional<std::uint64_t> version;
  {
    std::shared_lock lock(mu_);
    if (!authenticate(cred).can_read_global(session)) {
      throw AuthorizationError("'" + cred.principal + "' may not read the global model of '" +
                               session + "'");
    }
  }
  version = latest_version(session);
  if (!version) throw NotFound("session '" + session + "' has no global model");

  const std::string prefix = global_prefix(session, *version);
  auto manifest_doc = backend_->get(prefix + "manifest.json");
  if (!manifest_doc) throw CorruptionError("manifest missing for committed version " + prefix);
  const ChunkedBlob blob = blob_from_json(parse_doc(*manifest_doc, prefix + "manifest.json"));
  const Bytes payload = read_chunked(*backend_, blob);
  GlobalModel model;
  model.params = decode_parameters(payload);
  model.params.set_version(*version);
  model.version = *version;
  model.bytes = payload.size();
  return model;
}

void ParameterStore::put_client_result(const StoreCredential& cred, const ClientResult& result) {
  std::vector<std::pair<std::string, Shape>> layout;
  {
    std::shared_lock lock(mu_);
    if (!authenticate(cred).can_write_result(result.session_id, result.client_id)) {
      throw AuthorizationError("'" + cred.principal + "' may not write the result of client '" +
                               result.client_id + "'");
    }
    const auto* s = find_session_locked(result.session_id);
    if (s == nullptr) throw NotFound("unknown session '" + result.session_id + "'");
    if (result.round != s->round) {
      throw StaleRound("result for round " + std::to_string(result.round) + " but session '" +
                       result.session_id + "' is in round " + std::to_string(s->round));
    }
    layout = s->layout;
  }
  check_identifier(result.client_id, "client id");
  if (result.cardinality == 0) {
    throw InvalidArgument("client '" + result.client_id + "' reported zero training examples");
  }
  if (!result.params.all_finite()) {
    throw NonFiniteError("client '" + result.client_id + "' uploaded non-finite parameters");
  }
  if (!layout.empty() && layout != layout_of(result.params)) {
    ParameterSet expected;
    for (const auto& [name, shape] : layout) expected.add(name, Tensor::zeros(shape));
    expected.require_shape_compatible(result.params, "client '" + result.client_id + "'");
  }

  const std::string base = results_prefix(result.session_id, result.round) + result.client_id;
  const Bytes payload = encode_parameters(result.params);
  const ChunkedBlob blob = write_chunked(*backend_, base, payload, [&](std::size_t k) {
    return k == 0 ? base + ".bin" : base + ".bin." + std::to_string(k);
  });
  json manifest = {{"session", result.session_id},
                   {"round", result.round},
                   {"client_id", result.client_id},
                   {"cardinality", result.cardinality},
                   {"blob", blob_to_json(blob)}};
  if (result.test_metrics) {
    manifest["test_metrics"] = {{"loss", result.test_metrics->loss},
                                {"accuracy", result.test_metrics->accuracy},
                                {"test_cardinality", result.test_metrics->test_cardinality}};
  }
  backend_->put(base + ".json", as_span(manifest.dump()));
}

ClientResult ParameterStore::load_result(const std::string& manifest_key) const {
  auto doc = backend_->get(manifest_key);
  if (!doc) throw NotFound("result '" + manifest_key + "' not found");
  const json m = parse_doc(*doc, manifest_key);
  ClientResult r;
  r.session_id = m.at("session").get<std::string>();
  r.round = m.at("round").get<std::uint64_t>();
  r.client_id = m.at("client_id").get<std::string>();
  r.cardinality = m.at("cardinality").get<std::uint64_t>();
  r.params = decode_parameters(read_chunked(*backend_, blob_from_json(m.at("blob"))));
  if (m.contains("test_metrics")) {
    const auto& t = m.at("test_metrics");
    r.test_metrics = TestMetrics{t.at("loss").get<double>(), t.at("accuracy").get<double>(),
                                 t.at("test_cardinality").get<std::size_t>()};
  }
  return r;
}

std::vector<std::string> ParameterStore::list_round_results(const StoreCredential& cred,
                                                            const std::string& session,
                                                            std::uint64_t round) const {
  {
    std::shared_lock lock(mu_);
    if (!authenticate(cred).can_read_results(session)) {
      throw AuthorizationError("'" + cred.principal + "' may not read results of '" + session + "'");
    }
  }
  const std::string prefix = results_prefix(session, round);
  std::vector<std::string> ids;
  for (const auto& key : backend_->list(prefix)) {
    if (key.ends_with(".json")) ids.push_back(key.substr(prefix.size(), key.size() - prefix.size() - 5));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

ClientResult ParameterStore::get_client_result(const StoreCredential& cred,
                                               const std::string& session, std::uint64_t round,
                                               const std::string& client_id) const {
  {
    std::shared_lock lock(mu_);
    if (!authenticate(cred).can_read_results(session)) {
      throw AuthorizationError("'" + cred.principal + "' may not read the result of client '" +
                               client_id + "'");
    }
  }
  return load_result(results_prefix(session, round) + client_id + ".json");
}

ResultStream ParameterStore::stream_round_results(const StoreCredential& cred,
                                                  const std::string& session, std::uint64_t round,
                                                  std::size_t batch_size,
                                                  const std::optional<std::set<std::string>>& only) {
  if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
  const auto ids = list_round_results(cred, session, round);
  std::vector<std::string> keys;
  const std::string prefix = results_prefix(session, round);
  for (const auto& id : ids) {
    if (only && !only->contains(id)) continue;
    keys.push_back(prefix + id + ".json");
  }
  return ResultStream(this, std::move(keys), batch_size, &gauge_);
}

BudgetDecision ParameterStore::check_and_increment(const StoreCredential& cred,
                                                   const std::string& client_id,
                                                   std::uint64_t max_invocations) {
  {
    std::shared_lock lock(mu_);
    if (!authenticate(cred).can_use_counter(client_id)) {
      throw AuthorizationError("'" + cred.principal + "' may not touch the invocation counter of '" +
                               client_id + "'");
    }
  }
  check_identifier(client_id, "client id");
  std::lock_guard lock(counter_mu_);
  const std::uint64_t count = invocation_count(client_id);
  if (count + 1 > max_invocations) return {false, count};
  backend_->put("counters/" + client_id, as_span(std::to_string(count + 1)));
  return {true, count + 1};
}

std::uint64_t ParameterStore::invocation_count(const std::string& client_id) const {
  auto doc = backend_->get("counters/" + client_id);
  if (!doc) return 0;
  const std::string text = as_string(*doc);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc()) throw CorruptionError("counter for '" + client_id + "' is malformed");
  return v;
}

crypto::Digest ParameterStore::state_hash() const {
  crypto::Sha256 h;
  for (const auto& key : backend_->list("")) {
    auto doc = backend_->get(key);
    if (!doc) continue;
    h.update(key);
    h.update(std::string_view("\0", 1));
    const std::string len = std::to_string(doc->size());
    h.update(len);
    h.update(*doc);
  }
  return h.finish();
}

}  // namespace faasfl
