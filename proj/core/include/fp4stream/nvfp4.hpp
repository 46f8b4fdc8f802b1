// SPDX-License-Identifier: Apache-2.0
//
// NVFP4 block-scaled quantization.
//
// An element u in block B_i reconstructs as
//
//     x_hat[u] = decode_e2m1(code[u]) * decode_e4m3(scale[i]) * global_scale
//
// Blocks are 16 consecutive elements along the innermost axis; a short last
// block per row is allowed. The global scale is amax / (448 * 6).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fp4stream/fp_codec.hpp"
#include "fp4stream/tensor.hpp"
#include "fp4stream/tensor_file.hpp"

namespace fp4stream {

class RhtContext;

enum class QuantMode {
  Standard,     // block max -> 6
  ScaleSearch,  // best of block max -> 6 and block max -> 4
};

enum class ScaleTarget : std::uint8_t { Six = 6, Four = 4 };

struct PackedFp4Tensor {
  Shape dims;
  std::vector<std::uint8_t> codes;  // packed nibbles, row-major element order
  std::vector<E4m3Code> block_scales;
  float global_scale = 1.0f;
  // One entry per block when produced by the quantizer, empty after parsing
  // from disk. Diagnostic only; dequantization never reads it.
  std::vector<ScaleTarget> block_decisions;

  std::size_t size() const { return element_count(dims); }
  std::size_t inner() const { return dims.empty() ? 1 : dims.back(); }
  std::size_t outer() const { return inner() == 0 ? 0 : size() / inner(); }
  std::size_t blocks_per_row() const { return (inner() + kFp4BlockSize - 1) / kFp4BlockSize; }

  E2m1Code code(std::size_t index) const { return nibble_at(codes, index); }
  E4m3Code block_scale(std::size_t row, std::size_t block) const {
    return block_scales[row * blocks_per_row() + block];
  }

  friend bool operator==(const PackedFp4Tensor&, const PackedFp4Tensor&) = default;
};

struct BlockScaleChoice {
  E4m3Code scale;
  ScaleTarget target = ScaleTarget::Six;
  double squared_error = 0.0;  // in the original (unnormalized) units
};

/// Global scale amax / (448 * 6) as float32; 1 for an all-zero tensor.
float nvfp4_global_scale(std::span<const double> values);

/// Scale candidate cast_E4M3(block_max / target). Nonzero blocks never get a
/// zero scale; they are promoted to the smallest subnormal instead.
E4m3Code block_scale_candidate(double normalized_block_max, ScaleTarget target);

/// Max-to-6 vs max-to-4 scale choice for one block (at most 16 values). Ties keep the
/// 6-target scale.
BlockScaleChoice select_block_scale(std::span<const double> block, double global_scale);

/// Standard recipe for one block: always the 6-target scale.
BlockScaleChoice standard_block_scale(std::span<const double> block, double global_scale);

/// Quantizes along the innermost axis. `global_scale` overrides the amax rule
/// when set; callers that share a scale across tensors use it.
PackedFp4Tensor quantize_nvfp4(const Tensor& x, QuantMode mode,
                               std::optional<float> global_scale = std::nullopt);

Tensor dequantize_nvfp4(const PackedFp4Tensor& q);

/// Reconstructs a single element; exposed for the bit-level identity checks.
double dequantized_element(const PackedFp4Tensor& q, std::size_t index);

std::size_t storage_bytes(const PackedFp4Tensor& q);

struct QuantReport {
  double mse = 0.0;
  double max_abs_err = 0.0;
  double fraction_blocks_scale4 = 0.0;
};

/// Error of dequant(quantize(x)) against x. With an RHT context the tensor is
/// rotated before quantization and rotated back after dequantization.
QuantReport quant_error_report(const Tensor& x, QuantMode mode,
                               const RhtContext* rht = nullptr);

TensorFile to_tensor_file(const PackedFp4Tensor& q);
PackedFp4Tensor from_tensor_file(const TensorFile& file);

}  // namespace fp4stream
