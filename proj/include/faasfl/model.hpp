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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faasfl/tensor.hpp"

namespace faasfl {

enum class ModelKind { kLogisticRegression, kMlp };
enum class Activation { kRelu };
enum class Loss { kCategoricalCrossEntropy };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Dense feed-forward classifier description. Logistic regression is the
/// two-layer case [features, classes]; an MLP puts ReLU layers in between.
/// The output layer is always softmax.
struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::vector<std::size_t> layer_sizes;
  Activation hidden_activation = Activation::kRelu;
  Loss loss = Loss::kCategoricalCrossEntropy;

  std::size_t feature_dim() const { return layer_sizes.front(); }
  std::size_t classes() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return layer_sizes.size() - 1; }

  // Throws InvalidArgument when the layer list is inconsistent with `kind`.
  void validate() const;

  static ModelSpec logistic_regression(std::size_t features, std::size_t classes);
  static ModelSpec mlp(std::vector<std::size_t> layer_sizes);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::string kernel_name(std::size_t layer);
std::string bias_name(std::size_t layer);

// Weights plus biases over consecutive layer pairs.
std::size_t parameter_count(const ModelSpec& model);

// Glorot-uniform kernels, zero biases.
ParameterSet initialize_parameters(const ModelSpec& model, std::uint64_t seed);

// Class probabilities for a (B, features) batch.
Tensor forward(const ModelSpec& model, const ParameterSet& params, const Tensor& batch_x);

struct LossAndGradient {
  double loss = 0.0;
  ParameterSet gradient;
};

// Mean categorical cross-entropy over the batch. `batch_y` must be one-hot.
LossAndGradient loss_and_gradient(const ModelSpec& model, const ParameterSet& params,
                                  const Tensor& batch_x, const Tensor& batch_y);

// Same, with integer class labels.
LossAndGradient loss_and_gradient(const ModelSpec& model, const ParameterSet& params,
                                  const Tensor& batch_x, std::span<const int> labels);

struct Metrics {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

Metrics evaluate(const ModelSpec& model, const ParameterSet& params, const Tensor& features,
                 std::span<const int> labels);

// Rough forward+backward cost used by the fabric's virtual timing model.
double training_flops(const ModelSpec& model, std::size_t examples);

// Recovers the layer stack from parameter names and shapes.
ModelSpec infer_model_spec(const ParameterSet& params);

Tensor one_hot(std::span<const int> labels, std::size_t classes);

}  // namespace faasfl
