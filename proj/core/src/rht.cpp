// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/rht.hpp"

#include <random>
#include <string>

#include "fp4stream/error.hpp"

namespace fp4stream {

namespace {

// In-place unnormalized Walsh-Hadamard transform in Sylvester order.
void fwht16(double* v) {
  for (std::size_t len = 1; len < kRhtBlockSize; len <<= 1) {
    for (std::size_t i = 0; i < kRhtBlockSize; i += 2 * len) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double a = v[j];
        const double b = v[j + len];
        v[j] = a + b;
        v[j + len] = a - b;
      }
    }
  }
}

void require_aligned(const Tensor& x) {
  if (x.inner() % kRhtBlockSize != 0) {
    throw Error(ErrorCode::BlockMisalignment,
                "block misalignment: innermost extent " + std::to_string(x.inner()) +
                    " is not a multiple of 16");
  }
}

}  // namespace

RhtContext::RhtContext(std::uint64_t seed) : seed_(seed) {
  std::mt19937_64 gen(seed);
  const std::uint64_t bits = gen();
  for (std::size_t k = 0; k < kRhtBlockSize; ++k) {
    signs_[k] = ((bits >> k) & 1U) ? -1 : 1;
  }
}

std::array<double, kRhtBlockSize * kRhtBlockSize> RhtContext::matrix() const {
  std::array<double, kRhtBlockSize * kRhtBlockSize> m{};
  for (std::size_t col = 0; col < kRhtBlockSize; ++col) {
    double e[kRhtBlockSize] = {};
    e[col] = signs_[col];
    fwht16(e);
    for (std::size_t row = 0; row < kRhtBlockSize; ++row) {
      m[row * kRhtBlockSize + col] = e[row] / 4.0;
    }
  }
  return m;
}

Tensor rht_forward(const Tensor& x, const RhtContext& ctx) {
  require_aligned(x);
  Tensor y = x;
  const auto& s = ctx.signs();
  for (std::size_t base = 0; base < y.size(); base += kRhtBlockSize) {
    double* v = y.values.data() + base;
    for (std::size_t k = 0; k < kRhtBlockSize; ++k) v[k] *= s[k];
    fwht16(v);
    for (std::size_t k = 0; k < kRhtBlockSize; ++k) v[k] /= 4.0;
  }
  return y;
}

Tensor rht_inverse(const Tensor& y, const RhtContext& ctx) {
  require_aligned(y);
  Tensor x = y;
  const auto& s = ctx.signs();
  for (std::size_t base = 0; base < x.size(); base += kRhtBlockSize) {
    double* v = x.values.data() + base;
    fwht16(v);
    for (std::size_t k = 0; k < kRhtBlockSize; ++k) v[k] = v[k] / 4.0 * s[k];
  }
  return x;
}

}  // namespace fp4stream
