// Small fixtures shared by the unit tests.
#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "faasfl/data.hpp"
#include "faasfl/tensor.hpp"

namespace faasfl::test {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

inline ParameterSet single(std::vector<double> values) {
  ParameterSet p;
  const std::size_t n = values.size();
  p.add("w", Tensor({n}, std::move(values)));
  return p;
}

inline Dataset random_dataset(std::size_t n, std::size_t d, std::size_t classes,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor x = random_tensor({n, d}, rng);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  return Dataset(std::move(x), std::move(y), classes);
}

inline double max_abs_diff(const ParameterSet& a, const ParameterSet& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.tensor(i).size(); ++j) {
      m = std::max(m, std::abs(a.tensor(i)[j] - b.tensor(i)[j]));
    }
  }
  return m;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("faasfl-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace faasfl::test
