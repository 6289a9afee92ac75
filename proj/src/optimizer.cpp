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

#include "faasfl/optimizer.hpp"

#include <cmath>
#include <string>

#include "faasfl/error.hpp"

namespace faasfl {

std::string_view optimizer_kind_name(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be positive and finite");
  }
  if (kind == OptimizerKind::kAdam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      throw InvalidArgument("adam needs beta1, beta2 in [0, 1) and epsilon > 0");
    }
  }
}

void apply_update(OptimizerState& state, ParameterSet& params, const ParameterSet& grad) {
  params.require_shape_compatible(grad, "gradient");
  if (!grad.all_finite()) throw NonFiniteError("gradient contains non-finite entries");
  const auto& cfg = state.config;

  if (cfg.kind == OptimizerKind::kSgd) {
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto p = params.tensor(t).data();
      const auto g = grad.tensor(t).data();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learning_rate * g[i];
    }
    ++state.step;
    return;
  }

  if (state.first_moment.empty()) {
    state.first_moment = params.zeros_like();
    state.second_moment = params.zeros_like();
  } else {
    params.require_shape_compatible(state.first_moment, "adam first moment");
    params.require_shape_compatible(state.second_moment, "adam second moment");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params.tensor(k).data();
    auto m = state.first_moment.tensor(k).data();
    auto v = state.second_moment.tensor(k).data();
    const auto g = grad.tensor(k).data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

std::pair<ParameterSet, OptimizerState> optimizer_step(OptimizerState state, ParameterSet params,
                                                       const ParameterSet& grad) {
  apply_update(state, params, grad);
  return {std::move(params), std::move(state)};
}

}  // namespace faasfl
