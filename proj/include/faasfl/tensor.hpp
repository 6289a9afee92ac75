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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faasfl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor of 64-bit reals.
///
/// The constructor enforces product(shape) == data.size(); every dimension
/// must be positive.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Row-major 2-D access; callers guarantee rank() == 2.
  double& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct ParameterEntry {
  std::string name;
  Tensor tensor;

  friend bool operator==(const ParameterEntry&, const ParameterEntry&) = default;
};

/// Ordered, uniquely named collection of tensors: the unit exchanged between
/// the parameter store, client functions and the aggregator.
class ParameterSet {
 public:
  ParameterSet() = default;

  void add(std::string name, Tensor tensor);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const ParameterEntry& entry(std::size_t i) const { return entries_.at(i); }
  Tensor& tensor(std::size_t i) { return entries_.at(i).tensor; }
  const Tensor& tensor(std::size_t i) const { return entries_.at(i).tensor; }

  const Tensor* find(std::string_view name) const;
  Tensor* find(std::string_view name);

  // Throws NotFound naming the missing entry.
  const Tensor& get(std::string_view name) const;

  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  std::uint64_t version() const noexcept { return version_; }
  void set_version(std::uint64_t v) noexcept { version_ = v; }

  // Total number of scalar entries across all tensors.
  std::size_t flat_size() const noexcept;

  bool all_finite() const noexcept;

  // Names, order and shapes all match.
  bool shape_compatible(const ParameterSet& other) const noexcept;

  // Throws ShapeMismatch naming the first offending entry. `what` prefixes
  // the message so callers can identify the source (e.g. a client id).
  void require_shape_compatible(const ParameterSet& other, std::string_view what) const;

  // A ParameterSet with the same names/shapes and all-zero data.
  ParameterSet zeros_like() const;

  // Equal entries; version is not compared.
  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<ParameterEntry> entries_;
  std::uint64_t version_ = 0;
};

}  // namespace faasfl
