// SPDX-License-Identifier: Apache-2.0
//
// Scalar codecs for the two narrow float formats used by NVFP4.
//
//   E2M1 (FP4):  S EE M, bias 1, no inf/nan. Magnitudes 0, 0.5, 1, 1.5, 2, 3, 4, 6.
//   E4M3 (FP8):  S EEEE MMM, bias 7, no inf. S.1111.111 is NaN. Max 448,
//                smallest subnormal 2^-9.
//
// Both encoders round to nearest with ties to the even mantissa and saturate
// to the largest finite magnitude.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fp4stream {

struct E2m1Code {
  std::uint8_t bits = 0;  // low nibble only

  friend bool operator==(E2m1Code, E2m1Code) = default;
};

struct E4m3Code {
  std::uint8_t bits = 0;

  friend bool operator==(E4m3Code, E4m3Code) = default;
};

inline constexpr double kE2m1Max = 6.0;
inline constexpr double kE4m3Max = 448.0;
inline constexpr double kE4m3MinSubnormal = 1.0 / 512.0;

/// Magnitude table indexed by the low three bits of an E2M1 code.
inline constexpr double kE2m1Magnitudes[8] = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0};

E2m1Code encode_e2m1(double x);
double decode_e2m1(E2m1Code code);

E4m3Code encode_e4m3(double x);
double decode_e4m3(E4m3Code code);

constexpr bool is_nan(E4m3Code code) { return (code.bits & 0x7F) == 0x7F; }

/// Two codes per byte, first code in the low nibble. Odd counts leave the
/// final high nibble zero.
std::vector<std::uint8_t> pack_nibbles(std::span<const E2m1Code> codes);
std::vector<E2m1Code> unpack_nibbles(std::span<const std::uint8_t> bytes, std::size_t count);

inline E2m1Code nibble_at(std::span<const std::uint8_t> packed, std::size_t index) {
  const std::uint8_t byte = packed[index / 2];
  return E2m1Code{static_cast<std::uint8_t>((index % 2 == 0) ? (byte & 0x0F) : (byte >> 4))};
}

// IEEE binary16 helpers used for the KV-cache means and the float16 container dtype.
std::uint16_t to_half_bits(double x);
double from_half_bits(std::uint16_t bits);
inline double round_to_half(double x) { return from_half_bits(to_half_bits(x)); }

}  // namespace fp4stream
