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

#include <any>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "faasfl/clock.hpp"
#include "faasfl/lru_cache.hpp"

namespace faasfl {

using NamespaceCache = LruCache<std::string, std::any>;

// Runs `compute` at most once per (instance, key) while the entry survives.
template <typename T, typename Compute>
std::shared_ptr<const T> cached(NamespaceCache& cache, const std::string& key, Compute&& compute) {
  if (auto* hit = cache.get(key)) {
    if (auto* value = std::any_cast<std::shared_ptr<const T>>(hit)) return *value;
  }
  auto value = std::make_shared<const T>(compute());
  cache.put(key, value);
  return value;
}

// Handlers throw these to select an invocation outcome.
class DeadlineExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class OutOfMemory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class AuthRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Outcome { kOk, kTimeout, kOom, kHandlerError, kAuthReject };

std::string_view outcome_name(Outcome outcome);
Outcome parse_outcome(std::string_view name);

struct ColdStartProfile {
  enum class Kind { kConstant, kUniform, kLogNormal };
  Kind kind = Kind::kConstant;
  double a = 2.0;  // constant value | uniform low | lognormal median
  double b = 0.0;  // uniform high | lognormal sigma

  double sample(std::mt19937_64& rng) const;
};

/// Per-provider characteristics for heterogeneous fabrics.
struct PlatformProfile {
  std::string label = "default";
  ColdStartProfile cold_start;
  double bandwidth_bytes_per_s = 100e6;
  double gflops = 1.0;             // effective training throughput
  double request_overhead_s = 0.0;  // added to every invocation
};

struct FunctionDeployment {
  std::string function_id;
  std::string platform_label = "default";
  std::uint32_t memory_limit_mb = 2048;
  double timeout_s = 900.0;
  double keep_warm_s = 300.0;
  std::optional<ColdStartProfile> cold_start;  // overrides the platform's
  std::optional<double> cpu_ghz;               // else derived from the memory tier
  std::size_t cache_capacity = 64;
  std::string role = "client";
  std::uint64_t seed = 0;  // cold-start sampling
};

struct InvocationRecord {
  std::string function_id;
  std::string instance_id;
  bool cold = false;
  double start = 0.0;
  double duration_s = 0.0;
  double cold_start_s = 0.0;
  double billed_s = 0.0;
  std::uint32_t memory_limit_mb = 0;
  double cpu_ghz = 0.0;
  std::size_t peak_tracked_bytes = 0;
  std::size_t egress_bytes = 0;
  Outcome outcome = Outcome::kOk;
  std::int64_t round = -1;
  std::string role;

  double handler_s() const noexcept { return duration_s - cold_start_s; }
};

struct InvocationResult {
  std::optional<nlohmann::json> response;
  InvocationRecord record;
  std::string error;

  bool ok() const noexcept { return record.outcome == Outcome::kOk; }
};

/// Cooperative memory accounting: handlers register large allocations and
/// get OutOfMemory once the deployment's limit would be exceeded.
class MemoryTracker {
 public:
  class Lease {
   public:
    Lease() = default;
    Lease(Lease&& o) noexcept : tracker_(std::exchange(o.tracker_, nullptr)), bytes_(o.bytes_) {}
    Lease& operator=(Lease&& o) noexcept {
      if (this != &o) {
        release();
        tracker_ = std::exchange(o.tracker_, nullptr);
        bytes_ = o.bytes_;
      }
      return *this;
    }
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    ~Lease() { release(); }
    void release();

   private:
    friend class MemoryTracker;
    Lease(MemoryTracker* t, std::size_t b) : tracker_(t), bytes_(b) {}
    MemoryTracker* tracker_ = nullptr;
    std::size_t bytes_ = 0;
  };

  explicit MemoryTracker(std::size_t limit_bytes) : limit_(limit_bytes) {}

  Lease allocate(std::size_t bytes, std::string_view what = {});
  std::size_t current() const noexcept { return current_; }
  std::size_t peak() const noexcept { return peak_; }
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t limit_;
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
};

/// What a handler sees of its execution environment. Time is virtual:
/// handlers charge it through sleep/compute/transfer, and in measured mode
/// the real handler runtime is added on top.
class InvocationContext {
 public:
  InvocationContext(const FunctionDeployment& deployment, const PlatformProfile& platform,
                    std::string instance_id, bool cold, double start, double cold_start_s,
                    NamespaceCache& cache, std::size_t memory_limit_bytes);

  const FunctionDeployment& deployment() const noexcept { return deployment_; }
  const PlatformProfile& platform() const noexcept { return platform_; }
  const std::string& instance_id() const noexcept { return instance_id_; }
  bool cold() const noexcept { return cold_; }

  NamespaceCache& cache() noexcept { return cache_; }
  MemoryTracker& memory() noexcept { return memory_; }

  // Each throws DeadlineExceeded once the invocation runs past its timeout.
  void sleep(double seconds);
  void compute(double flops);
  void transfer(std::size_t bytes);

  double elapsed() const noexcept { return elapsed_; }  // handler time so far
  double now() const noexcept { return start_ + cold_start_s_ + elapsed_; }
  double deadline() const noexcept { return start_ + deployment_.timeout_s; }

  void add_egress(std::size_t bytes) noexcept { egress_ += bytes; }
  std::size_t egress() const noexcept { return egress_; }

 private:
  friend class Fabric;
  void charge(double seconds);

  const FunctionDeployment& deployment_;
  const PlatformProfile& platform_;
  std::string instance_id_;
  bool cold_;
  double start_;
  double cold_start_s_;
  NamespaceCache& cache_;
  MemoryTracker memory_;
  double elapsed_ = 0.0;
  std::size_t egress_ = 0;
};

using Handler = std::function<nlohmann::json(InvocationContext&, const nlohmann::json&)>;

enum class TimingMode { kVirtual, kMeasured };

struct FabricOptions {
  double billing_granularity_s = 0.1;
  TimingMode timing = TimingMode::kVirtual;
  // Memory tier (MB) -> CPU GHz; the smallest tier >= the limit applies.
  std::map<std::uint32_t, double> ghz_tiers = {{128, 0.2},  {256, 0.4},  {512, 0.8},
                                               {1024, 1.4}, {2048, 2.4}, {4096, 4.8},
                                               {8192, 4.8}};
};

struct InvokeOptions {
  std::optional<double> at;  // virtual start; defaults to the clock
  std::int64_t round = -1;
};

struct BillingSummary {
  std::size_t invocations = 0;
  double gb_seconds = 0.0;
  double ghz_seconds = 0.0;
  std::size_t egress_bytes = 0;
};

double billed_duration(double duration_s, double granularity_s);

BillingSummary billing_summary(std::span<const InvocationRecord> records, double granularity_s);

/// In-process FaaS platform: per-function instance pools with cold/warm
/// lifecycle, keep-warm reclamation, timeout and memory enforcement, and a
/// billing record for every invocation.
class Fabric {
 public:
  explicit Fabric(FabricOptions options = {},
                  std::shared_ptr<const Clock> clock = std::make_shared<SimClock>());

  void add_platform(PlatformProfile profile);
  const PlatformProfile& platform(const std::string& label) const;

  void deploy(FunctionDeployment deployment, Handler handler);
  bool deployed(const std::string& function_id) const;
  const FunctionDeployment& deployment(const std::string& function_id) const;

  // Always yields exactly one record, whatever the handler does.
  InvocationResult invoke(const std::string& function_id, const nlohmann::json& request,
                          InvokeOptions options = {});

  // Destroys instances idle for at least keep_warm_s.
  std::size_t reclaim_idle(double now);

  std::size_t instance_count(const std::string& function_id = {}) const;

  std::vector<InvocationRecord> records() const;
  double busy_time() const;
  const FabricOptions& options() const noexcept { return options_; }
  double cpu_ghz_for(const FunctionDeployment& d) const;

 private:
  struct Instance {
    std::string id;
    std::unique_ptr<NamespaceCache> cache;
    bool busy = false;
    double last_used = 0.0;
  };

  struct Function {
    FunctionDeployment deployment;
    Handler handler;
    std::vector<std::shared_ptr<Instance>> instances;
    std::uint64_t next_instance = 0;
    std::mt19937_64 rng;
  };

  std::size_t reclaim_locked(Function& fn, double now);

  FabricOptions options_;
  std::shared_ptr<const Clock> clock_;

  mutable std::mutex mu_;
  std::map<std::string, PlatformProfile> platforms_;
  std::map<std::string, Function> functions_;
  std::vector<InvocationRecord> records_;
  double busy_time_ = 0.0;
};

void write_records_csv(const std::filesystem::path& path, std::span<const InvocationRecord> records);
std::vector<InvocationRecord> read_records_csv(const std::filesystem::path& path);

}  // namespace faasfl
