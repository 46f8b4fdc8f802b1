// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "fp4stream/nvfp4.hpp"
#include "fp4stream/tensor.hpp"

namespace fp4stream {

/// lhs (M x K) times rhs^T where rhs is stored N x K, both blocked along K.
/// Accumulates block by block in double:
///   out[m][n] = sum_b (s_a * s_b * g_a * g_b) * sum_{u in b} code_a[u] * code_b[u]
Tensor qmatmul(const PackedFp4Tensor& lhs, const PackedFp4Tensor& rhs);

/// Linear layer on a frozen NVFP4 backbone plus a full-precision LoRA branch:
///   W = Dequant(qweight) + (lora_alpha / rank) * B * A
struct QLinear {
  PackedFp4Tensor qweight;  // out x in
  Tensor lora_a;            // rank x in
  Tensor lora_b;            // out x rank
  std::size_t rank = 0;
  double lora_alpha = 1.0;

  std::size_t out_features() const { return qweight.outer(); }
  std::size_t in_features() const { return qweight.inner(); }
};

/// Backbone quantized with scale search, no adapter.
QLinear make_qlinear(const Tensor& weight);

/// x is in x batch. Activations are quantized with the standard recipe along
/// the contraction axis; the LoRA branch sees the unquantized x.
Tensor qlinear_forward(const QLinear& layer, const Tensor& x);

/// (lora_alpha / rank) * B * (A * x); an out x batch zero tensor when rank is 0.
Tensor lora_branch_forward(const QLinear& layer, const Tensor& x);

Tensor effective_weight(const QLinear& layer);

}  // namespace fp4stream
