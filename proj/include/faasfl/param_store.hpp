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
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "faasfl/clock.hpp"
#include "faasfl/crypto.hpp"
#include "faasfl/serialize.hpp"
#include "faasfl/tensor.hpp"

namespace faasfl {

inline constexpr std::size_t kDefaultDocSizeLimit = 16u * 1024u * 1024u;

// ---------------------------------------------------------------------------
// Document backends

/// Flat key/value document storage with a hard per-document size limit.
class DocumentBackend {
 public:
  explicit DocumentBackend(std::size_t doc_size_limit) : limit_(doc_size_limit) {}
  virtual ~DocumentBackend() = default;

  std::size_t doc_size_limit() const noexcept { return limit_; }

  // Throws DocumentTooLarge past the limit.
  void put(const std::string& key, std::span<const std::uint8_t> payload);
  virtual std::shared_ptr<const Bytes> get(const std::string& key) const = 0;
  virtual std::vector<std::string> list(const std::string& prefix) const = 0;

 protected:
  virtual void store(const std::string& key, std::span<const std::uint8_t> payload) = 0;

 private:
  std::size_t limit_;
};

class MemoryBackend final : public DocumentBackend {
 public:
  using DocumentBackend::DocumentBackend;
  std::shared_ptr<const Bytes> get(const std::string& key) const override;
  std::vector<std::string> list(const std::string& prefix) const override;

 protected:
  void store(const std::string& key, std::span<const std::uint8_t> payload) override;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const Bytes>> docs_;
};

/// One file per document under `root`; keys are relative paths.
class DirectoryBackend final : public DocumentBackend {
 public:
  DirectoryBackend(std::filesystem::path root, std::size_t doc_size_limit);
  std::shared_ptr<const Bytes> get(const std::string& key) const override;
  std::vector<std::string> list(const std::string& prefix) const override;

 protected:
  void store(const std::string& key, std::span<const std::uint8_t> payload) override;

 private:
  std::filesystem::path root_;
};

struct ChunkedBlob {
  std::string blob_id;
  std::vector<std::string> chunk_ids;
  std::size_t total_bytes = 0;
  crypto::Digest checksum{};
};

// Splits `payload` into documents `<prefix>{chunk names}` of at most the
// backend's limit. Chunk names come from `chunk_key(k)`.
template <typename KeyFn>
ChunkedBlob write_chunked(DocumentBackend& backend, std::string blob_id,
                          std::span<const std::uint8_t> payload, KeyFn chunk_key) {
  ChunkedBlob blob;
  blob.blob_id = std::move(blob_id);
  blob.total_bytes = payload.size();
  blob.checksum = crypto::sha256(payload);
  const std::size_t limit = backend.doc_size_limit();
  std::size_t k = 0;
  std::size_t pos = 0;
  do {
    const std::size_t len = std::min(limit, payload.size() - pos);
    std::string key = chunk_key(k);
    backend.put(key, payload.subspan(pos, len));
    blob.chunk_ids.push_back(std::move(key));
    pos += len;
    ++k;
  } while (pos < payload.size());
  return blob;
}

// Throws NotFound for missing chunks, CorruptionError on size or checksum
// mismatch.
Bytes read_chunked(const DocumentBackend& backend, const ChunkedBlob& blob);

// ---------------------------------------------------------------------------
// Access control

enum class StoreRole { kAdmin, kAggregator, kClient };

struct StoreScope {
  StoreRole role = StoreRole::kClient;
  std::string session;    // empty for admin
  std::string client_id;  // clients only

  static StoreScope admin() { return {StoreRole::kAdmin, {}, {}}; }
  static StoreScope aggregator(std::string session) {
    return {StoreRole::kAggregator, std::move(session), {}};
  }
  static StoreScope client(std::string session, std::string client_id) {
    return {StoreRole::kClient, std::move(session), std::move(client_id)};
  }

  bool can_read_global(const std::string& s) const;
  bool can_write_global(const std::string& s) const;
  bool can_write_result(const std::string& s, const std::string& client) const;
  bool can_read_results(const std::string& s) const;
  bool can_use_counter(const std::string& client) const;
};

struct StoreCredential {
  std::string principal;
  std::string secret;
  StoreScope scope;
  double expiry = 0.0;
};

// ---------------------------------------------------------------------------
// Stored records

struct TestMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t test_cardinality = 0;
};

struct ClientResult {
  std::string session_id;
  std::uint64_t round = 0;
  std::string client_id;
  ParameterSet params;
  std::uint64_t cardinality = 0;
  std::optional<TestMetrics> test_metrics;
};

struct GlobalModel {
  ParameterSet params;
  std::uint64_t version = 0;
  std::size_t bytes = 0;
};

/// Counts simultaneously decoded client results. The aggregator reads the
/// peak to check its buffering bound.
class ResidencyGauge {
 public:
  void acquire(std::size_t n);
  void release(std::size_t n);
  std::size_t current() const noexcept { return current_.load(); }
  std::size_t peak() const noexcept { return peak_.load(); }
  void reset_peak() { peak_.store(current_.load()); }

 private:
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

/// RAII hold on gauge slots.
class GaugeLease {
 public:
  GaugeLease() = default;
  GaugeLease(ResidencyGauge* gauge, std::size_t n) : gauge_(gauge), n_(n) {
    if (gauge_ != nullptr) gauge_->acquire(n_);
  }
  GaugeLease(GaugeLease&& o) noexcept : gauge_(std::exchange(o.gauge_, nullptr)), n_(o.n_) {}
  GaugeLease& operator=(GaugeLease&& o) noexcept {
    if (this != &o) {
      reset();
      gauge_ = std::exchange(o.gauge_, nullptr);
      n_ = o.n_;
    }
    return *this;
  }
  GaugeLease(const GaugeLease&) = delete;
  GaugeLease& operator=(const GaugeLease&) = delete;
  ~GaugeLease() { reset(); }

  void reset() {
    if (gauge_ != nullptr) gauge_->release(n_);
    gauge_ = nullptr;
  }

 private:
  ResidencyGauge* gauge_ = nullptr;
  std::size_t n_ = 0;
};

struct ResultBatch {
  std::vector<ClientResult> results;
  std::vector<std::size_t> encoded_bytes;  // per result, for transfer accounting
  GaugeLease lease;
};

class ParameterStore;

/// Lazily decodes one round's results, batch by batch.
class ResultStream {
 public:
  std::optional<ResultBatch> next();
  std::size_t total() const noexcept { return keys_.size(); }

 private:
  friend class ParameterStore;
  ResultStream(const ParameterStore* store, std::vector<std::string> keys, std::size_t batch_size,
               ResidencyGauge* gauge)
      : store_(store), keys_(std::move(keys)), batch_size_(batch_size), gauge_(gauge) {}

  const ParameterStore* store_;
  std::vector<std::string> keys_;
  std::size_t batch_size_;
  std::size_t pos_ = 0;
  ResidencyGauge* gauge_;
};

struct BudgetDecision {
  bool allowed = false;
  std::uint64_t count = 0;  // invocations recorded after this call
};

struct StoreOptions {
  std::size_t doc_size_limit = kDefaultDocSizeLimit;
  std::optional<std::filesystem::path> directory;  // in-memory when unset
};

/// Versioned global-model storage plus per-round client results, guarded by
/// scoped, expiring, revocable credentials.
///
/// Global models are written as chunked blobs under a fresh version prefix;
/// the version becomes visible only when the session's commit pointer flips,
/// so readers never see a mix of two writes.
class ParameterStore {
 public:
  explicit ParameterStore(StoreOptions options = {},
                          std::shared_ptr<const Clock> clock = std::make_shared<WallClock>());

  const StoreCredential& admin_credential() const noexcept { return admin_; }

  StoreCredential issue_credential(const StoreCredential& admin, StoreScope scope, double ttl_s);
  void revoke_credential(const StoreCredential& admin, const std::string& principal);

  // Creates the session on first use. Results are accepted only for the
  // current round.
  void open_round(const StoreCredential& admin, const std::string& session, std::uint64_t round);
  std::uint64_t current_round(const std::string& session) const;

  // Version 0 is the first model ever stored for a session.
  std::uint64_t put_global_model(const StoreCredential& cred, const std::string& session,
                                 const ParameterSet& params);
  GlobalModel get_global_model(const StoreCredential& cred, const std::string& session) const;
  std::optional<std::uint64_t> latest_version(const std::string& session) const;

  void put_client_result(const StoreCredential& cred, const ClientResult& result);
  std::vector<std::string> list_round_results(const StoreCredential& cred,
                                              const std::string& session,
                                              std::uint64_t round) const;
  ClientResult get_client_result(const StoreCredential& cred, const std::string& session,
                                 std::uint64_t round, const std::string& client_id) const;

  // `only`, when given, restricts the stream to those client ids.
  ResultStream stream_round_results(const StoreCredential& cred, const std::string& session,
                                    std::uint64_t round, std::size_t batch_size,
                                    const std::optional<std::set<std::string>>& only = std::nullopt);

  // Atomically bumps the client's invocation counter unless that would
  // exceed `max_invocations`; a denied call leaves the counter untouched.
  BudgetDecision check_and_increment(const StoreCredential& cred, const std::string& client_id,
                                     std::uint64_t max_invocations);
  std::uint64_t invocation_count(const std::string& client_id) const;

  // Digest over every stored document (keys and payloads, sorted by key).
  crypto::Digest state_hash() const;

  ResidencyGauge& gauge() noexcept { return gauge_; }
  std::size_t doc_size_limit() const noexcept { return backend_->doc_size_limit(); }
  const Clock& clock() const noexcept { return *clock_; }

 private:
  friend class ResultStream;

  struct CredentialRecord {
    std::string secret;
    StoreScope scope;
    double expiry;
  };

  struct SessionState {
    std::uint64_t round = 0;
    std::optional<std::uint64_t> latest;
    std::vector<std::pair<std::string, Shape>> layout;
    std::unique_ptr<std::mutex> commit_mu = std::make_unique<std::mutex>();
  };

  const StoreScope& authenticate(const StoreCredential& cred) const;
  SessionState& session_locked(const std::string& session);
  const SessionState* find_session_locked(const std::string& session) const;
  ClientResult load_result(const std::string& manifest_key) const;

  std::unique_ptr<DocumentBackend> backend_;
  std::shared_ptr<const Clock> clock_;
  StoreCredential admin_;

  mutable std::shared_mutex mu_;
  std::map<std::string, CredentialRecord> credentials_;
  std::map<std::string, SessionState> sessions_;
  std::uint64_t next_principal_ = 0;

  std::mutex counter_mu_;
  ResidencyGauge gauge_;
};

}  // namespace faasfl
