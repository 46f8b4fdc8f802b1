// SPDX-License-Identifier: Apache-2.0
//
// NVT1 tensor container. All integers little-endian.
//
//   offset 0   magic   "NVT1"
//          4   version u8 (= 1)
//          5   dtype   u8  0 = float32, 1 = float16, 2 = packed-fp4
//          6   ndim    u8
//          7   dims    ndim x u64
//          .   payload
//
// packed-fp4 payload: ceil(n/2) code bytes, one E4M3 byte per 16-element block
// along the innermost axis, then the float32 global scale.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fp4stream/tensor.hpp"

namespace fp4stream {

enum class DType : std::uint8_t {
  Float32 = 0,
  Float16 = 1,
  PackedFp4 = 2,
};

inline constexpr std::uint8_t kTensorFileVersion = 1;
inline constexpr std::size_t kFp4BlockSize = 16;

struct TensorFile {
  DType dtype = DType::Float32;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

std::size_t expected_payload_size(DType dtype, std::span<const std::uint64_t> dims);

std::vector<std::uint8_t> serialize(const TensorFile& file);
TensorFile parse_tensor_file(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const TensorFile& file);
TensorFile read_tensor(const std::filesystem::path& path);

// float dtypes only; values are rounded to the target width.
TensorFile encode_real(const Tensor& tensor, DType dtype = DType::Float32);
Tensor decode_real(const TensorFile& file);

}  // namespace fp4stream
