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

#include "faasfl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "faasfl/error.hpp"

namespace faasfl {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kAuthentication: return "authentication";
    case ErrorCode::kAuthorization: return "authorization";
    case ErrorCode::kCorruption: return "corruption";
    case ErrorCode::kStaleRound: return "stale_round";
    case ErrorCode::kDocumentTooLarge: return "document_too_large";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kInvalidRequest: return "invalid_request";
    case ErrorCode::kFailedPrecondition: return "failed_precondition";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  out += ")";
  return out;
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (std::any_of(shape_.begin(), shape_.end(), [](std::size_t d) { return d == 0; })) {
    throw InvalidArgument("tensor dimensions must be positive, got " + shape_to_string(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw ShapeMismatch("tensor shape " + shape_to_string(shape_) + " needs " +
                        std::to_string(shape_size(shape_)) + " values, got " +
                        std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void ParameterSet::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr) {
    throw InvalidArgument("duplicate parameter name '" + name + "'");
  }
  entries_.push_back({std::move(name), std::move(tensor)});
}

const Tensor* ParameterSet::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

Tensor* ParameterSet::find(std::string_view name) {
  for (auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

const Tensor& ParameterSet::get(std::string_view name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw NotFound("parameter '" + std::string(name) + "' not present");
  return *t;
}

std::size_t ParameterSet::flat_size() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

bool ParameterSet::all_finite() const noexcept {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const ParameterEntry& e) { return e.tensor.all_finite(); });
}

bool ParameterSet::shape_compatible(const ParameterSet& other) const noexcept {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (entries_[i].tensor.shape() != other.entries_[i].tensor.shape()) return false;
  }
  return true;
}

void ParameterSet::require_shape_compatible(const ParameterSet& other, std::string_view what) const {
  const std::string prefix = what.empty() ? std::string() : std::string(what) + ": ";
  if (entries_.size() != other.entries_.size()) {
    throw ShapeMismatch(prefix + "expected " + std::to_string(entries_.size()) +
                        " parameter tensors, got " + std::to_string(other.entries_.size()));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name) {
      throw ShapeMismatch(prefix + "tensor " + std::to_string(i) + " is named '" + b.name +
                          "', expected '" + a.name + "'");
    }
    if (a.tensor.shape() != b.tensor.shape()) {
      throw ShapeMismatch(prefix + "tensor '" + a.name + "' has shape " +
                          shape_to_string(b.tensor.shape()) + ", expected " +
                          shape_to_string(a.tensor.shape()));
    }
  }
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& e : entries_) out.add(e.name, Tensor::zeros(e.tensor.shape()));
  out.set_version(version_);
  return out;
}

}  // namespace faasfl
