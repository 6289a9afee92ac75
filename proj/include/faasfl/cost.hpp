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

#include <filesystem>
#include <span>
#include <vector>

#include "faasfl/controller.hpp"
#include "faasfl/fabric.hpp"

namespace faasfl {

inline constexpr double kBytesPerGb = 1024.0 * 1024.0 * 1024.0;

struct FaasPrices {
  double price_per_invocation = 0.0;
  double price_per_gb_second = 0.0;
  double price_per_ghz_second = 0.0;
  double price_per_egress_gb = 0.0;
};

struct IaasPrices {
  double price_per_instance_hour = 0.0;
  std::size_t instances = 0;  // VMs kept up for the whole session
  double price_per_egress_gb = 0.0;
  double billing_granularity_s = 1.0;
};

/// Prices are always inputs; nothing here carries a default tariff.
struct CostModel {
  FaasPrices faas;
  IaasPrices iaas;

  void validate() const;
};

struct FaasCost {
  std::size_t invocations = 0;
  double gb_seconds = 0.0;
  double ghz_seconds = 0.0;
  double egress_gb = 0.0;

  double invocation_cost = 0.0;
  double memory_cost = 0.0;
  double cpu_cost = 0.0;
  double network_cost = 0.0;
  double total = 0.0;
};

struct IaasCost {
  double billed_s = 0.0;
  double instance_hours = 0.0;
  double egress_gb = 0.0;

  double compute_cost = 0.0;
  double network_cost = 0.0;
  double total = 0.0;
};

// Only billed time enters; `duration_multiplier` scales the billed seconds
// (the invocation count term stays fixed).
FaasCost estimate_faas_cost(std::span<const InvocationRecord> records, const CostModel& model,
                            double duration_multiplier = 1.0);

// Every instance is billed for the whole session wall time, idle or not.
IaasCost estimate_iaas_cost(double session_wall_time_s, const CostModel& model, double egress_gb);

struct SensitivityPoint {
  double multiplier = 1.0;
  double faas_cost = 0.0;
  double iaas_cost = 0.0;
};

struct CostEstimate {
  FaasCost faas;
  IaasCost iaas;
  std::vector<SensitivityPoint> band;  // ascending multipliers

  // (iaas - faas) / iaas; positive when FaaS is cheaper.
  double relative_gap() const;
};

inline const std::vector<double> kDefaultMultipliers = {0.5, 1.0, 2.0, 3.0};

// The band scales FaaS billed time and the IaaS wall time by each multiplier.
// The egress fed to the IaaS side is the FaaS trace's.
CostEstimate compare(std::span<const InvocationRecord> faas_records, double session_wall_time_s,
                     const CostModel& model, std::span<const double> multipliers = kDefaultMultipliers);

// Client-role records only; the comparison concerns client costs.
std::vector<InvocationRecord> client_records(std::span<const InvocationRecord> records);

struct CostCurveRow {
  std::uint64_t round = 0;
  double target_accuracy = 0.0;
  double faas_cost = 0.0;
  double iaas_cost = 0.0;
  double multiplier = 1.0;
};

// For each target reached, cumulative costs after every round up to the
// round that first reaches it. IaaS wall time is the sum of round totals.
std::vector<CostCurveRow> cost_curve(std::span<const InvocationRecord> records,
                                     std::span<const MetricsRow> rounds, const CostModel& model,
                                     std::span<const double> targets,
                                     std::span<const double> multipliers = kDefaultMultipliers);

void write_cost_curve_csv(const std::filesystem::path& path, std::span<const CostCurveRow> rows);

}  // namespace faasfl
