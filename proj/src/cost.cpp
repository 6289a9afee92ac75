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

#include "faasfl/cost.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "faasfl/error.hpp"

namespace faasfl {
namespace {

void require_price(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string(name) + " must be finite and non-negative");
  }
}

}  // namespace

void CostModel::validate() const {
  require_price(faas.price_per_invocation, "faas.price_per_invocation");
  require_price(faas.price_per_gb_second, "faas.price_per_gb_second");
  require_price(faas.price_per_ghz_second, "faas.price_per_ghz_second");
  require_price(faas.price_per_egress_gb, "faas.price_per_egress_gb");
  require_price(iaas.price_per_instance_hour, "iaas.price_per_instance_hour");
  require_price(iaas.price_per_egress_gb, "iaas.price_per_egress_gb");
  if (!(iaas.billing_granularity_s > 0.0)) {
    throw InvalidArgument("iaas.billing_granularity_s must be positive");
  }
}

FaasCost estimate_faas_cost(std::span<const InvocationRecord> records, const CostModel& model,
                            double duration_multiplier) {
  model.validate();
  if (!(duration_multiplier >= 0.0)) throw InvalidArgument("duration multiplier must be non-negative");
  FaasCost c;
  std::size_t egress = 0;
  for (const auto& r : records) {
    ++c.invocations;
    c.gb_seconds += (r.memory_limit_mb / 1024.0) * r.billed_s;
    c.ghz_seconds += r.cpu_ghz * r.billed_s;
    egress += r.egress_bytes;
  }
  c.gb_seconds *= duration_multiplier;
  c.ghz_seconds *= duration_multiplier;
  c.egress_gb = static_cast<double>(egress) / kBytesPerGb;
  c.invocation_cost = static_cast<double>(c.invocations) * model.faas.price_per_invocation;
  c.memory_cost = c.gb_seconds * model.faas.price_per_gb_second;
  c.cpu_cost = c.ghz_seconds * model.faas.price_per_ghz_second;
  c.network_cost = c.egress_gb * model.faas.price_per_egress_gb;
  c.total = c.invocation_cost + c.memory_cost + c.cpu_cost + c.network_cost;
  return c;
}

IaasCost estimate_iaas_cost(double session_wall_time_s, const CostModel& model, double egress_gb) {
  model.validate();
  if (!(session_wall_time_s >= 0.0)) throw InvalidArgument("wall time must be non-negative");
  const double g = model.iaas.billing_granularity_s;
  IaasCost c;
  c.billed_s = session_wall_time_s <= 0.0 ? 0.0 : std::ceil(session_wall_time_s / g - 1e-9) * g;
  c.instance_hours = static_cast<double>(model.iaas.instances) * c.billed_s / 3600.0;
  c.egress_gb = egress_gb;
  c.compute_cost = c.instance_hours * model.iaas.price_per_instance_hour;
  c.network_cost = egress_gb * model.iaas.price_per_egress_gb;
  c.total = c.compute_cost + c.network_cost;
  return c;
}

double CostEstimate::relative_gap() const {
  return iaas.total > 0.0 ? (iaas.total - faas.total) / iaas.total : 0.0;
}

CostEstimate compare(std::span<const InvocationRecord> faas_records, double session_wall_time_s,
                     const CostModel& model, std::span<const double> multipliers) {
  CostEstimate out;
  out.faas = estimate_faas_cost(faas_records, model);
  out.iaas = estimate_iaas_cost(session_wall_time_s, model, out.faas.egress_gb);
  std::vector<double> ms(multipliers.begin(), multipliers.end());
  std::sort(ms.begin(), ms.end());
  for (double m : ms) {
    out.band.push_back({m, estimate_faas_cost(faas_records, model, m).total,
                        estimate_iaas_cost(session_wall_time_s * m, model, out.faas.egress_gb).total});
  }
  return out;
}

std::vector<InvocationRecord> client_records(std::span<const InvocationRecord> records) {
  std::vector<InvocationRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const InvocationRecord& r) { return r.role == "client"; });
  return out;
}

std::vector<CostCurveRow> cost_curve(std::span<const InvocationRecord> records,
                                     std::span<const MetricsRow> rounds, const CostModel& model,
                                     std::span<const double> targets,
                                     std::span<const double> multipliers) {
  std::map<std::uint64_t, std::vector<InvocationRecord>> by_round;
  for (const auto& r : records) {
    if (r.round >= 0) by_round[static_cast<std::uint64_t>(r.round)].push_back(r);
  }
  std::vector<CostCurveRow> rows;
  for (double target : targets) {
    auto reach = std::find_if(rounds.begin(), rounds.end(),
                              [&](const MetricsRow& r) { return r.accuracy >= target; });
    if (reach == rounds.end()) continue;
    for (double m : multipliers) {
      double wall = 0.0;
      double faas = 0.0;
      double egress_gb = 0.0;
      auto next_round = by_round.begin();
      for (auto it = rounds.begin(); it != std::next(reach); ++it) {
        wall += it->total_s;
        for (; next_round != by_round.end() && next_round->first <= it->round; ++next_round) {
          const FaasCost f = estimate_faas_cost(next_round->second, model, m);
          faas += f.total;
          egress_gb += f.egress_gb;
        }
        rows.push_back({it->round, target, faas, estimate_iaas_cost(wall * m, model, egress_gb).total, m});
      }
    }
  }
  return rows;
}

void write_cost_curve_csv(const std::filesystem::path& path, std::span<const CostCurveRow> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "round,target_accuracy,faas_cost,iaas_cost,multiplier\n";
  for (const auto& r : rows) {
    out << r.round << ',' << r.target_accuracy << ',' << r.faas_cost << ',' << r.iaas_cost << ','
        << r.multiplier << "\n";
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace faasfl
