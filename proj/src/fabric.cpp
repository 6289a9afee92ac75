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

#include "faasfl/fabric.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "faasfl/error.hpp"

namespace faasfl {
namespace {

constexpr double kTimeEpsilon = 1e-9;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string_view outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::kOk: return "ok";
    case Outcome::kTimeout: return "timeout";
    case Outcome::kOom: return "oom";
    case Outcome::kHandlerError: return "handler_error";
    case Outcome::kAuthReject: return "auth_reject";
  }
  return "unknown";
}

Outcome parse_outcome(std::string_view name) {
  for (Outcome o : {Outcome::kOk, Outcome::kTimeout, Outcome::kOom, Outcome::kHandlerError,
                    Outcome::kAuthReject}) {
    if (outcome_name(o) == name) return o;
  }
  throw InvalidArgument("unknown outcome '" + std::string(name) + "'");
}

double ColdStartProfile::sample(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::kConstant: return a;
    case Kind::kUniform: return std::uniform_real_distribution<double>(a, b)(rng);
    case Kind::kLogNormal: return std::lognormal_distribution<double>(std::log(a), b)(rng);
  }
  return a;
}

// --- memory ------------------------------------------------------------------

MemoryTracker::Lease MemoryTracker::allocate(std::size_t bytes, std::string_view what) {
  if (current_ + bytes > limit_) {
    throw OutOfMemory("allocating " + std::to_string(bytes) + " bytes" +
                      (what.empty() ? std::string() : " for " + std::string(what)) +
                      " exceeds the memory limit of " + std::to_string(limit_) + " bytes");
  }
  current_ += bytes;
  peak_ = std::max(peak_, current_);
  return Lease(this, bytes);
}

void MemoryTracker::Lease::release() {
  if (tracker_ != nullptr) tracker_->current_ -= bytes_;
  tracker_ = nullptr;
}

// --- context -----------------------------------------------------------------

InvocationContext::InvocationContext(const FunctionDeployment& deployment,
                                     const PlatformProfile& platform, std::string instance_id,
                                     bool cold, double start, double cold_start_s,
                                     NamespaceCache& cache, std::size_t memory_limit_bytes)
    : deployment_(deployment),
      platform_(platform),
      instance_id_(std::move(instance_id)),
      cold_(cold),
      start_(start),
      cold_start_s_(cold_start_s),
      cache_(cache),
      memory_(memory_limit_bytes) {}

void InvocationContext::charge(double seconds) {
  if (seconds < 0.0 || !std::isfinite(seconds)) {
    throw InvalidArgument("cannot charge a negative or non-finite duration");
  }
  elapsed_ += seconds;
  if (cold_start_s_ + elapsed_ > deployment_.timeout_s + kTimeEpsilon) {
    throw DeadlineExceeded("function '" + deployment_.function_id + "' exceeded its " +
                           std::to_string(deployment_.timeout_s) + " s timeout");
  }
}

void InvocationContext::sleep(double seconds) { charge(seconds); }

void InvocationContext::compute(double flops) { charge(flops / (platform_.gflops * 1e9)); }

void InvocationContext::transfer(std::size_t bytes) {
  charge(static_cast<double>(bytes) / platform_.bandwidth_bytes_per_s);
}

// --- billing -----------------------------------------------------------------

double billed_duration(double duration_s, double granularity_s) {
  if (duration_s <= 0.0) return 0.0;
  if (granularity_s <= 0.0) return duration_s;
  // Tolerate representation error: 4.2 / 0.1 must bill 42 units, not 43.
  const double units = std::ceil(duration_s / granularity_s - 1e-9);
  return std::max(1.0, units) * granularity_s;
}

BillingSummary billing_summary(std::span<const InvocationRecord> records, double granularity_s) {
  BillingSummary s;
  for (const auto& r : records) {
    const double billed = billed_duration(r.duration_s, granularity_s);
    ++s.invocations;
    s.gb_seconds += (r.memory_limit_mb / 1024.0) * billed;
    s.ghz_seconds += r.cpu_ghz * billed;
    s.egress_bytes += r.egress_bytes;
  }
  return s;
}

// --- fabric ------------------------------------------------------------------

Fabric::Fabric(FabricOptions options, std::shared_ptr<const Clock> clock)
    : options_(std::move(options)), clock_(std::move(clock)) {
  platforms_.emplace("default", PlatformProfile{});
}

void Fabric::add_platform(PlatformProfile profile) {
  if (!(profile.bandwidth_bytes_per_s > 0.0) || !(profile.gflops > 0.0)) {
    throw InvalidArgument("platform '" + profile.label + "' needs positive bandwidth and gflops");
  }
  std::lock_guard lock(mu_);
  platforms_[profile.label] = std::move(profile);
}

const PlatformProfile& Fabric::platform(const std::string& label) const {
  std::lock_guard lock(mu_);
  auto it = platforms_.find(label);
  if (it == platforms_.end()) throw NotFound("unknown platform '" + label + "'");
  return it->second;
}

double Fabric::cpu_ghz_for(const FunctionDeployment& d) const {
  if (d.cpu_ghz) return *d.cpu_ghz;
  auto it = options_.ghz_tiers.lower_bound(d.memory_limit_mb);
  if (it == options_.ghz_tiers.end()) {
    return options_.ghz_tiers.empty() ? 0.0 : options_.ghz_tiers.rbegin()->second;
  }
  return it->second;
}

void Fabric::deploy(FunctionDeployment deployment, Handler handler) {
  if (deployment.function_id.empty()) throw InvalidArgument("function id must not be empty");
  if (deployment.memory_limit_mb == 0 || !(deployment.timeout_s > 0.0) ||
      deployment.keep_warm_s < 0.0) {
    throw InvalidArgument("function '" + deployment.function_id +
                          "' needs a positive memory limit and timeout");
  }
  std::lock_guard lock(mu_);
  if (!platforms_.contains(deployment.platform_label)) {
    throw NotFound("function '" + deployment.function_id + "' targets unknown platform '" +
                   deployment.platform_label + "'");
  }
  if (functions_.contains(deployment.function_id)) {
    throw InvalidArgument("function '" + deployment.function_id + "' is already deployed");
  }
  Function fn;
  fn.rng.seed(deployment.seed);
  fn.deployment = std::move(deployment);
  fn.handler = std::move(handler);
  const std::string id = fn.deployment.function_id;
  functions_.emplace(id, std::move(fn));
}

bool Fabric::deployed(const std::string& function_id) const {
  std::lock_guard lock(mu_);
  return functions_.contains(function_id);
}

const FunctionDeployment& Fabric::deployment(const std::string& function_id) const {
  std::lock_guard lock(mu_);
  auto it = functions_.find(function_id);
  if (it == functions_.end()) throw NotFound("function '" + function_id + "' is not deployed");
  return it->second.deployment;
}

std::size_t Fabric::reclaim_locked(Function& fn, double now) {
  const double keep = fn.deployment.keep_warm_s;
  const auto before = fn.instances.size();
  std::erase_if(fn.instances, [&](const std::shared_ptr<Instance>& inst) {
    return !inst->busy && now - inst->last_used >= keep - kTimeEpsilon;
  });
  return before - fn.instances.size();
}

std::size_t Fabric::reclaim_idle(double now) {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (auto& [id, fn] : functions_) n += reclaim_locked(fn, now);
  return n;
}

std::size_t Fabric::instance_count(const std::string& function_id) const {
  std::lock_guard lock(mu_);
  if (!function_id.empty()) {
    auto it = functions_.find(function_id);
    return it == functions_.end() ? 0 : it->second.instances.size();
  }
  std::size_t n = 0;
  for (const auto& [id, fn] : functions_) n += fn.instances.size();
  return n;
}

InvocationResult Fabric::invoke(const std::string& function_id, const nlohmann::json& request,
                                InvokeOptions options) {
  const double start = options.at.value_or(clock_->now());
  Function* fn = nullptr;
  const PlatformProfile* platform = nullptr;
  std::shared_ptr<Instance> instance;
  bool cold = false;
  double cold_start_s = 0.0;
  {
    std::lock_guard lock(mu_);
    auto it = functions_.find(function_id);
    if (it == functions_.end()) throw NotFound("function '" + function_id + "' is not deployed");
    fn = &it->second;
    platform = &platforms_.at(fn->deployment.platform_label);
    reclaim_locked(*fn, start);

    // Reuse the most recently used instance that is idle at `start`.
    for (auto& inst : fn->instances) {
      if (inst->busy || inst->last_used > start + kTimeEpsilon) continue;
      if (!instance || inst->last_used > instance->last_used) instance = inst;
    }
    if (!instance) {
      instance = std::make_shared<Instance>();
      instance->id = function_id + "#" + std::to_string(fn->next_instance++);
      instance->cache = std::make_unique<NamespaceCache>(fn->deployment.cache_capacity);
      fn->instances.push_back(instance);
      cold = true;
      const auto& profile = fn->deployment.cold_start ? *fn->deployment.cold_start : platform->cold_start;
      cold_start_s = std::max(0.0, profile.sample(fn->rng));
    }
    instance->busy = true;
  }

  const FunctionDeployment& dep = fn->deployment;
  InvocationContext ctx(dep, *platform, instance->id, cold, start, cold_start_s, *instance->cache,
                        static_cast<std::size_t>(dep.memory_limit_mb) * 1024u * 1024u);

  InvocationResult result;
  Outcome outcome = Outcome::kOk;
  bool destroy_instance = false;
  const auto wall_start = std::chrono::steady_clock::now();
  try {
    ctx.charge(platform->request_overhead_s);
    nlohmann::json response = fn->handler(ctx, request);
    if (options_.timing == TimingMode::kMeasured) {
      ctx.charge(std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count());
    }
    result.response = std::move(response);
  } catch (const DeadlineExceeded& e) {
    outcome = Outcome::kTimeout;
    result.error = e.what();
  } catch (const OutOfMemory& e) {
    outcome = Outcome::kOom;
    result.error = e.what();
    destroy_instance = true;
  } catch (const AuthRejected& e) {
    outcome = Outcome::kAuthReject;
    result.error = e.what();
  } catch (const std::exception& e) {
    outcome = Outcome::kHandlerError;
    result.error = e.what();
  }

  InvocationRecord& rec = result.record;
  rec.function_id = function_id;
  rec.instance_id = instance->id;
  rec.cold = cold;
  rec.start = start;
  rec.cold_start_s = cold_start_s;
  rec.duration_s = outcome == Outcome::kTimeout ? dep.timeout_s
                                                : std::min(dep.timeout_s, cold_start_s + ctx.elapsed());
  rec.billed_s = billed_duration(rec.duration_s, options_.billing_granularity_s);
  rec.memory_limit_mb = dep.memory_limit_mb;
  rec.cpu_ghz = cpu_ghz_for(dep);
  rec.peak_tracked_bytes = ctx.memory().peak();
  rec.egress_bytes = ctx.egress();
  rec.outcome = outcome;
  rec.round = options.round;
  rec.role = dep.role;
  if (outcome != Outcome::kOk) result.response.reset();

  std::lock_guard lock(mu_);
  instance->busy = false;
  instance->last_used = start + rec.duration_s;
  if (destroy_instance) std::erase(fn->instances, instance);
  records_.push_back(rec);
  busy_time_ += rec.duration_s;
  return result;
}

std::vector<InvocationRecord> Fabric::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

double Fabric::busy_time() const {
  std::lock_guard lock(mu_);
  return busy_time_;
}

// --- CSV ---------------------------------------------------------------------

namespace {
constexpr const char* kCsvHeader =
    "function_id,cold,duration_s,outcome,billed_s,instance_id,start_s,cold_start_s,"
    "memory_limit_mb,cpu_ghz,peak_tracked_bytes,egress_bytes,round,role";
}

void write_records_csv(const std::filesystem::path& path, std::span<const InvocationRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << kCsvHeader << "\n";
  for (const auto& r : records) {
    out << r.function_id << ',' << (r.cold ? 1 : 0) << ',' << r.duration_s << ','
        << outcome_name(r.outcome) << ',' << r.billed_s << ',' << r.instance_id << ',' << r.start
        << ',' << r.cold_start_s << ',' << r.memory_limit_mb << ',' << r.cpu_ghz << ','
        << r.peak_tracked_bytes << ',' << r.egress_bytes << ',' << r.round << ',' << r.role << "\n";
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<InvocationRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw InvalidArgument(path.string() + ": unexpected trace header");
  }
  std::vector<InvocationRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 14) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": expected 14 columns");
    }
    try {
      InvocationRecord r;
      r.function_id = c[0];
      r.cold = c[1] == "1";
      r.duration_s = std::stod(c[2]);
      r.outcome = parse_outcome(c[3]);
      r.billed_s = std::stod(c[4]);
      r.instance_id = c[5];
      r.start = std::stod(c[6]);
      r.cold_start_s = std::stod(c[7]);
      r.memory_limit_mb = static_cast<std::uint32_t>(std::stoul(c[8]));
      r.cpu_ghz = std::stod(c[9]);
      r.peak_tracked_bytes = std::stoull(c[10]);
      r.egress_bytes = std::stoull(c[11]);
      r.round = std::stoll(c[12]);
      r.role = c[13];
      out.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace faasfl
