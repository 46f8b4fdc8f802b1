// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include "fp4stream/tensor.hpp"

namespace fp4stream {

inline constexpr std::size_t kRhtBlockSize = 16;

/// Randomized Hadamard rotation applied independently to each 16-element block
/// of the innermost axis: y = H16 * diag(sign) * x / 4, with H16 the Sylvester
/// Hadamard matrix. The sign vector comes from the low 16 bits of the first
/// mt19937_64 draw for the seed (bit k set -> sign[k] = -1).
class RhtContext {
 public:
  explicit RhtContext(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  const std::array<int, kRhtBlockSize>& signs() const { return signs_; }

  /// Dense transform matrix, row-major.
  std::array<double, kRhtBlockSize * kRhtBlockSize> matrix() const;

 private:
  std::uint64_t seed_;
  std::array<int, kRhtBlockSize> signs_{};
};

Tensor rht_forward(const Tensor& x, const RhtContext& ctx);
Tensor rht_inverse(const Tensor& y, const RhtContext& ctx);

}  // namespace fp4stream
