// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/fp_codec.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "fp4stream/error.hpp"

namespace fp4stream {

namespace {

void require_finite(double x) {
  if (!std::isfinite(x)) {
    throw Error(ErrorCode::NonFinite, "non-finite input to encoder");
  }
}

}  // namespace

E2m1Code encode_e2m1(double x) {
  require_finite(x);
  const double mag = std::abs(x);
  std::uint8_t best = 7;
  if (mag < kE2m1Max) {
    // Scan adjacent pairs; the magnitudes are sorted so the first pair that
    // brackets mag decides. On an exact midpoint the even index (mantissa 0) wins.
    for (std::uint8_t lo = 0; lo < 7; ++lo) {
      const double a = kE2m1Magnitudes[lo];
      const double b = kE2m1Magnitudes[lo + 1];
      if (mag > b) continue;
      const double da = mag - a;
      const double db = b - mag;
      if (da < db) {
        best = lo;
      } else if (db < da) {
        best = static_cast<std::uint8_t>(lo + 1);
      } else {
        best = (lo % 2 == 0) ? lo : static_cast<std::uint8_t>(lo + 1);
      }
      break;
    }
  }
  if (best == 0) return E2m1Code{0};
  const std::uint8_t sign = std::signbit(x) ? 0x8 : 0x0;
  return E2m1Code{static_cast<std::uint8_t>(sign | best)};
}

double decode_e2m1(E2m1Code code) {
  const double mag = kE2m1Magnitudes[code.bits & 0x7];
  if (mag == 0.0) return 0.0;
  return (code.bits & 0x8) ? -mag : mag;
}

E4m3Code encode_e4m3(double x) {
  require_finite(x);
  const std::uint8_t sign = std::signbit(x) ? 0x80 : 0x00;
  const double mag = std::abs(x);
  if (mag >= kE4m3Max) return E4m3Code{static_cast<std::uint8_t>(sign | 0x7E)};

  std::uint8_t bits = 0;
  constexpr double kMinNormal = 1.0 / 64.0;
  if (mag < kMinNormal) {
    // Subnormal grid has spacing 2^-9; a result of 8 lands on the smallest
    // normal, whose encoding is also 8.
    bits = static_cast<std::uint8_t>(std::nearbyint(std::ldexp(mag, 9)));
  } else {
    int exp = 0;
    std::frexp(mag, &exp);  // mag = f * 2^exp, f in [0.5, 1)
    const int e = exp - 1;  // mag in [2^e, 2^(e+1))
    auto q = static_cast<int>(std::nearbyint(std::ldexp(mag, 3 - e)));  // in [8, 16]
    int biased = e + 7;
    if (q == 16) {
      q = 8;
      ++biased;
    }
    if (biased > 15 || (biased == 15 && q - 8 == 7)) {
      bits = 0x7E;
    } else {
      bits = static_cast<std::uint8_t>((biased << 3) | (q - 8));
    }
  }
  if (bits == 0) return E4m3Code{0};
  return E4m3Code{static_cast<std::uint8_t>(sign | bits)};
}

double decode_e4m3(E4m3Code code) {
  if (is_nan(code)) {
    throw Error(ErrorCode::NonFinite, "E4M3 NaN pattern 0x" + std::to_string(code.bits));
  }
  const int exp_bits = (code.bits >> 3) & 0xF;
  const int mant = code.bits & 0x7;
  double mag = 0.0;
  if (exp_bits == 0) {
    mag = std::ldexp(static_cast<double>(mant), -9);
  } else {
    mag = std::ldexp(static_cast<double>(8 + mant), exp_bits - 7 - 3);
  }
  if (mag == 0.0) return 0.0;
  return (code.bits & 0x80) ? -mag : mag;
}

std::vector<std::uint8_t> pack_nibbles(std::span<const E2m1Code> codes) {
  std::vector<std::uint8_t> out((codes.size() + 1) / 2, 0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto nibble = static_cast<std::uint8_t>(codes[i].bits & 0x0F);
    out[i / 2] |= (i % 2 == 0) ? nibble : static_cast<std::uint8_t>(nibble << 4);
  }
  return out;
}

std::vector<E2m1Code> unpack_nibbles(std::span<const std::uint8_t> bytes, std::size_t count) {
  if (count > bytes.size() * 2) {
    throw Error(ErrorCode::Truncated, "truncated: " + std::to_string(count) +
                                          " nibbles requested from " +
                                          std::to_string(bytes.size()) + " bytes");
  }
  std::vector<E2m1Code> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = nibble_at(bytes, i);
  return out;
}

std::uint16_t to_half_bits(double x) {
  return Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(static_cast<float>(x)));
}

double from_half_bits(std::uint16_t bits) {
  return static_cast<double>(static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(bits)));
}

}  // namespace fp4stream
