// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace fp4stream {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

/// Dense row-major real tensor. The innermost axis is the last entry of dims.
struct Tensor {
  Shape dims;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(Shape d) : dims(std::move(d)), values(element_count(dims), 0.0) {}
  Tensor(Shape d, std::vector<double> v) : dims(std::move(d)), values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }

  // Innermost extent; a scalar-shaped (rank 0) tensor counts as one element.
  std::size_t inner() const { return dims.empty() ? 1 : dims.back(); }
  std::size_t outer() const { return inner() == 0 ? 0 : size() / inner(); }

  double& at(std::size_t row, std::size_t col) { return values[row * inner() + col]; }
  double at(std::size_t row, std::size_t col) const { return values[row * inner() + col]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * inner(), inner()}; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * inner(), inner()};
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

Tensor transpose(const Tensor& matrix);

Tensor matmul(const Tensor& lhs, const Tensor& rhs);

double mean_squared_error(const Tensor& a, const Tensor& b);

double max_abs_error(const Tensor& a, const Tensor& b);

}  // namespace fp4stream
