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

#include <cstdint>
#include <string_view>
#include <utility>

#include "faasfl/tensor.hpp"

namespace faasfl {

enum class OptimizerKind { kSgd, kAdam };

std::string_view optimizer_kind_name(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  static OptimizerConfig sgd(double lr) { return {OptimizerKind::kSgd, lr}; }
  static OptimizerConfig adam(double lr = 1e-3) { return {OptimizerKind::kAdam, lr}; }

  void validate() const;
};

/// Optimizer configuration plus its running state. Adam moments are created
/// lazily on the first step so they always match the parameters' layout.
struct OptimizerState {
  OptimizerConfig config;
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step = 0;

  explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}
};

// In-place update. Throws NonFiniteError if `grad` has NaN/Inf entries and
// ShapeMismatch if the three sets disagree on layout; `params` is untouched
// in both cases.
void apply_update(OptimizerState& state, ParameterSet& params, const ParameterSet& grad);

// Value-returning form: (params', state').
std::pair<ParameterSet, OptimizerState> optimizer_step(OptimizerState state, ParameterSet params,
                                                       const ParameterSet& grad);

}  // namespace faasfl
