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

#include "faasfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "faasfl/error.hpp"

namespace faasfl {
namespace {

constexpr double kProbabilityFloor = 1e-12;

struct Layer {
  const Tensor* kernel;  // (in, out)
  const Tensor* bias;    // (out)
};

std::vector<Layer> bind_layers(const ModelSpec& model, const ParameterSet& params) {
  model.validate();
  if (params.size() != 2 * model.layer_count()) {
    throw ShapeMismatch("model expects " + std::to_string(2 * model.layer_count()) +
                        " parameter tensors, got " + std::to_string(params.size()));
  }
  std::vector<Layer> layers;
  layers.reserve(model.layer_count());
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const std::size_t in = model.layer_sizes[l];
    const std::size_t out = model.layer_sizes[l + 1];
    const auto& k = params.entry(2 * l);
    const auto& b = params.entry(2 * l + 1);
    if (k.name != kernel_name(l) || k.tensor.shape() != Shape{in, out}) {
      throw ShapeMismatch("parameter '" + k.name + "' " + shape_to_string(k.tensor.shape()) +
                          " does not match expected '" + kernel_name(l) + "' " +
                          shape_to_string(Shape{in, out}));
    }
    if (b.name != bias_name(l) || b.tensor.shape() != Shape{out}) {
      throw ShapeMismatch("parameter '" + b.name + "' " + shape_to_string(b.tensor.shape()) +
                          " does not match expected '" + bias_name(l) + "' " +
                          shape_to_string(Shape{out}));
    }
    layers.push_back({&k.tensor, &b.tensor});
  }
  return layers;
}

void check_batch(const ModelSpec& model, const Tensor& batch_x) {
  if (batch_x.rank() != 2 || batch_x.dim(1) != model.feature_dim()) {
    throw ShapeMismatch("batch_x has shape " + shape_to_string(batch_x.shape()) +
                        ", expected (B, " + std::to_string(model.feature_dim()) + ")");
  }
}

// Activations per layer boundary; acts[0] is the input, acts.back() the
// softmax output. Pre-activations are kept for the ReLU derivative.
struct Trace {
  std::size_t batch = 0;
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> pre;
};

void softmax_rows(std::vector<double>& z, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = z.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
  }
}

Trace run_forward(const ModelSpec& model, const std::vector<Layer>& layers, const Tensor& x) {
  Trace t;
  t.batch = x.dim(0);
  t.acts.emplace_back(x.data().begin(), x.data().end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t in = model.layer_sizes[l];
    const std::size_t out = model.layer_sizes[l + 1];
    const auto& a = t.acts.back();
    const auto w = layers[l].kernel->data();
    const auto b = layers[l].bias->data();
    std::vector<double> z(t.batch * out);
    for (std::size_t r = 0; r < t.batch; ++r) {
      double* zr = z.data() + r * out;
      std::copy(b.begin(), b.end(), zr);
      const double* ar = a.data() + r * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = ar[i];
        if (ai == 0.0) continue;
        const double* wi = w.data() + i * out;
        for (std::size_t o = 0; o < out; ++o) zr[o] += ai * wi[o];
      }
    }
    const bool last = (l + 1 == layers.size());
    if (last) {
      t.pre.push_back({});
      softmax_rows(z, t.batch, out);
      t.acts.push_back(std::move(z));
    } else {
      std::vector<double> h(z.size());
      std::transform(z.begin(), z.end(), h.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
      t.pre.push_back(std::move(z));
      t.acts.push_back(std::move(h));
    }
  }
  return t;
}

LossAndGradient backward(const ModelSpec& model, const ParameterSet& params,
                         const std::vector<Layer>& layers, const Trace& t,
                         std::span<const int> labels) {
  const std::size_t batch = t.batch;
  const std::size_t classes = model.classes();
  const auto& probs = t.acts.back();

  LossAndGradient out;
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    loss -= std::log(std::max(probs[r * classes + labels[r]], kProbabilityFloor));
  }
  out.loss = loss / static_cast<double>(batch);

  // dL/dz for the softmax output, averaged over the batch.
  std::vector<double> delta(probs);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    delta[r * classes + labels[r]] -= 1.0;
  }
  for (double& d : delta) d *= inv_batch;

  std::vector<Tensor> grads(2 * layers.size());
  for (std::size_t li = layers.size(); li-- > 0;) {
    const std::size_t in = model.layer_sizes[li];
    const std::size_t outw = model.layer_sizes[li + 1];
    const auto& a = t.acts[li];
    std::vector<double> dw(in * outw, 0.0);
    std::vector<double> db(outw, 0.0);
    for (std::size_t r = 0; r < batch; ++r) {
      const double* ar = a.data() + r * in;
      const double* dr = delta.data() + r * outw;
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = ar[i];
        if (ai == 0.0) continue;
        double* dwi = dw.data() + i * outw;
        for (std::size_t o = 0; o < outw; ++o) dwi[o] += ai * dr[o];
      }
      for (std::size_t o = 0; o < outw; ++o) db[o] += dr[o];
    }
    grads[2 * li] = Tensor({in, outw}, std::move(dw));
    grads[2 * li + 1] = Tensor({outw}, std::move(db));

    if (li > 0) {
      const auto w = layers[li].kernel->data();
      const auto& z = t.pre[li - 1];
      std::vector<double> prev(batch * in, 0.0);
      for (std::size_t r = 0; r < batch; ++r) {
        const double* dr = delta.data() + r * outw;
        double* pr = prev.data() + r * in;
        for (std::size_t i = 0; i < in; ++i) {
          if (z[r * in + i] <= 0.0) continue;
          const double* wi = w.data() + i * outw;
          double s = 0.0;
          for (std::size_t o = 0; o < outw; ++o) s += wi[o] * dr[o];
          pr[i] = s;
        }
      }
      delta = std::move(prev);
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    out.gradient.add(params.entry(i).name, std::move(grads[i]));
  }
  return out;
}

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
  if (labels.size() != batch) {
    throw ShapeMismatch("got " + std::to_string(labels.size()) + " labels for a batch of " +
                        std::to_string(batch));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidArgument("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
  }
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::kMlp ? "mlp" : "logistic_regression";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "logistic_regression") return ModelKind::kLogisticRegression;
  if (name == "mlp") return ModelKind::kMlp;
  throw InvalidArgument("unknown model kind '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw InvalidArgument("a model needs at least an input and an output layer");
  }
  if (std::any_of(layer_sizes.begin(), layer_sizes.end(), [](std::size_t s) { return s == 0; })) {
    throw InvalidArgument("layer sizes must be positive");
  }
  if (kind == ModelKind::kLogisticRegression && layer_sizes.size() != 2) {
    throw InvalidArgument("logistic regression takes exactly [features, classes]");
  }
}

ModelSpec ModelSpec::logistic_regression(std::size_t features, std::size_t classes) {
  ModelSpec m;
  m.kind = ModelKind::kLogisticRegression;
  m.layer_sizes = {features, classes};
  m.validate();
  return m;
}

ModelSpec ModelSpec::mlp(std::vector<std::size_t> layer_sizes) {
  ModelSpec m;
  m.kind = ModelKind::kMlp;
  m.layer_sizes = std::move(layer_sizes);
  m.validate();
  return m;
}

std::string kernel_name(std::size_t layer) { return "layer_" + std::to_string(layer) + "/kernel"; }
std::string bias_name(std::size_t layer) { return "layer_" + std::to_string(layer) + "/bias"; }

std::size_t parameter_count(const ModelSpec& model) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
    n += model.layer_sizes[l] * model.layer_sizes[l + 1] + model.layer_sizes[l + 1];
  }
  return n;
}

ParameterSet initialize_parameters(const ModelSpec& model, std::uint64_t seed) {
  model.validate();
  std::mt19937_64 rng(seed);
  ParameterSet params;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const std::size_t in = model.layer_sizes[l];
    const std::size_t out = model.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(in * out);
    for (double& v : w) v = dist(rng);
    params.add(kernel_name(l), Tensor({in, out}, std::move(w)));
    params.add(bias_name(l), Tensor::zeros({out}));
  }
  return params;
}

Tensor forward(const ModelSpec& model, const ParameterSet& params, const Tensor& batch_x) {
  const auto layers = bind_layers(model, params);
  check_batch(model, batch_x);
  Trace t = run_forward(model, layers, batch_x);
  return Tensor({t.batch, model.classes()}, std::move(t.acts.back()));
}

LossAndGradient loss_and_gradient(const ModelSpec& model, const ParameterSet& params,
                                  const Tensor& batch_x, std::span<const int> labels) {
  const auto layers = bind_layers(model, params);
  check_batch(model, batch_x);
  check_labels(labels, batch_x.dim(0), model.classes());
  const Trace t = run_forward(model, layers, batch_x);
  return backward(model, params, layers, t, labels);
}

LossAndGradient loss_and_gradient(const ModelSpec& model, const ParameterSet& params,
                                  const Tensor& batch_x, const Tensor& batch_y) {
  check_batch(model, batch_x);
  if (batch_y.rank() != 2 || batch_y.dim(0) != batch_x.dim(0) ||
      batch_y.dim(1) != model.classes()) {
    throw ShapeMismatch("batch_y has shape " + shape_to_string(batch_y.shape()) + ", expected (" +
                        std::to_string(batch_x.dim(0)) + ", " + std::to_string(model.classes()) +
                        ")");
  }
  std::vector<int> labels(batch_y.dim(0));
  for (std::size_t r = 0; r < batch_y.dim(0); ++r) {
    int hot = -1;
    for (std::size_t c = 0; c < batch_y.dim(1); ++c) {
      const double v = batch_y.at(r, c);
      if (v == 1.0 && hot < 0) {
        hot = static_cast<int>(c);
      } else if (v != 0.0) {
        throw InvalidArgument("batch_y row " + std::to_string(r) + " is not one-hot");
      }
    }
    if (hot < 0) throw InvalidArgument("batch_y row " + std::to_string(r) + " is not one-hot");
    labels[r] = hot;
  }
  return loss_and_gradient(model, params, batch_x, labels);
}

Metrics evaluate(const ModelSpec& model, const ParameterSet& params, const Tensor& features,
                 std::span<const int> labels) {
  const auto layers = bind_layers(model, params);
  check_batch(model, features);
  check_labels(labels, features.dim(0), model.classes());
  const Trace t = run_forward(model, layers, features);
  const auto& probs = t.acts.back();
  const std::size_t classes = model.classes();
  Metrics m;
  m.count = t.batch;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t r = 0; r < t.batch; ++r) {
    const double* row = probs.data() + r * classes;
    const auto best = static_cast<int>(std::max_element(row, row + classes) - row);
    if (best == labels[r]) ++correct;
    loss -= std::log(std::max(row[labels[r]], kProbabilityFloor));
  }
  m.loss = loss / static_cast<double>(t.batch);
  m.accuracy = static_cast<double>(correct) / static_cast<double>(t.batch);
  return m;
}

double training_flops(const ModelSpec& model, std::size_t examples) {
  return 6.0 * static_cast<double>(parameter_count(model)) * static_cast<double>(examples);
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor t = Tensor::zeros({labels.size(), classes});
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw InvalidArgument("label " + std::to_string(labels[r]) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
    t.at(r, static_cast<std::size_t>(labels[r])) = 1.0;
  }
  return t;
}

ModelSpec infer_model_spec(const ParameterSet& params) {
  ModelSpec m;
  for (std::size_t layer = 0;; ++layer) {
    const Tensor* kernel = params.find(kernel_name(layer));
    if (kernel == nullptr) break;
    if (kernel->rank() != 2) throw InvalidArgument(kernel_name(layer) + " must be a matrix");
    if (layer == 0) m.layer_sizes.push_back(kernel->dim(0));
    if (kernel->dim(0) != m.layer_sizes.back()) {
      throw ShapeMismatch(kernel_name(layer) + " does not chain with the previous layer");
    }
    m.layer_sizes.push_back(kernel->dim(1));
  }
  if (m.layer_sizes.empty()) throw InvalidArgument("parameter set holds no recognizable layers");
  m.kind = m.layer_sizes.size() == 2 ? ModelKind::kLogisticRegression : ModelKind::kMlp;
  m.validate();
  if (params.size() != 2 * m.layer_count()) {
    throw InvalidArgument("parameter set has entries beyond the layer stack");
  }
  return m;
}

}  // namespace faasfl
