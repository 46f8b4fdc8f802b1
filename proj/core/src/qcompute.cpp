// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/qcompute.hpp"

#include <algorithm>
#include <string>

#include "fp4stream/error.hpp"

namespace fp4stream {

namespace {

std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

double block_scale_value(E4m3Code scale) {
  return (scale.bits & 0x7F) == 0 ? 0.0 : decode_e4m3(scale);
}

}  // namespace

Tensor qmatmul(const PackedFp4Tensor& lhs, const PackedFp4Tensor& rhs) {
  if (lhs.dims.size() != 2 || rhs.dims.size() != 2 || lhs.inner() != rhs.inner()) {
    throw Error(ErrorCode::ShapeMismatch, "qmatmul shape mismatch: " + shape_string(lhs.dims) +
                                              " vs " + shape_string(rhs.dims) +
                                              " (rhs is stored N x K)");
  }
  const std::size_t m = lhs.outer();
  const std::size_t n = rhs.outer();
  const std::size_t k = lhs.inner();
  const std::size_t blocks = lhs.blocks_per_row();
  const double global = static_cast<double>(lhs.global_scale) * static_cast<double>(rhs.global_scale);

  // Decode codes once; E2M1 products are exact in double.
  std::vector<double> a(lhs.size());
  std::vector<double> b(rhs.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = decode_e2m1(lhs.code(i));
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = decode_e2m1(rhs.code(i));

  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t blk = 0; blk < blocks; ++blk) {
        const double sa = block_scale_value(lhs.block_scale(i, blk));
        const double sb = block_scale_value(rhs.block_scale(j, blk));
        if (sa == 0.0 || sb == 0.0) continue;
        const std::size_t begin = blk * kFp4BlockSize;
        const std::size_t end = std::min(k, begin + kFp4BlockSize);
        double dot = 0.0;
        for (std::size_t u = begin; u < end; ++u) dot += a[i * k + u] * b[j * k + u];
        acc += (sa * sb * global) * dot;
      }
      out.values[i * n + j] = acc;
    }
  }
  return out;
}

QLinear make_qlinear(const Tensor& weight) {
  if (weight.dims.size() != 2) {
    throw Error(ErrorCode::ShapeMismatch, "weight must be a matrix");
  }
  QLinear layer;
  layer.qweight = quantize_nvfp4(weight, QuantMode::ScaleSearch);
  return layer;
}

Tensor effective_weight(const QLinear& layer) {
  Tensor w = dequantize_nvfp4(layer.qweight);
  if (layer.rank == 0) return w;
  const Tensor delta = matmul(layer.lora_b, layer.lora_a);
  const double scale = layer.lora_alpha / static_cast<double>(layer.rank);
  for (std::size_t i = 0; i < w.size(); ++i) w.values[i] += scale * delta.values[i];
  return w;
}

Tensor lora_branch_forward(const QLinear& layer, const Tensor& x) {
  if (x.dims.size() != 2 || x.dims[0] != layer.in_features()) {
    throw Error(ErrorCode::ShapeMismatch, "qlinear input " + shape_string(x.dims) +
                                              " does not have " +
                                              std::to_string(layer.in_features()) + " rows");
  }
  if (layer.rank == 0) return Tensor({layer.out_features(), x.dims[1]});
  if (layer.lora_a.empty() || layer.lora_b.empty()) {
    throw Error(ErrorCode::InvalidArgument, "rank > 0 but LoRA A/B missing");
  }
  const Shape a_dims{layer.rank, layer.in_features()};
  const Shape b_dims{layer.out_features(), layer.rank};
  if (layer.lora_a.dims != a_dims || layer.lora_b.dims != b_dims) {
    throw Error(ErrorCode::ShapeMismatch, "LoRA shapes " + shape_string(layer.lora_a.dims) +
                                              ", " + shape_string(layer.lora_b.dims) +
                                              " do not match rank " + std::to_string(layer.rank));
  }
  Tensor branch = matmul(layer.lora_b, matmul(layer.lora_a, x));
  const double scale = layer.lora_alpha / static_cast<double>(layer.rank);
  for (double& v : branch.values) v *= scale;
  return branch;
}

Tensor qlinear_forward(const QLinear& layer, const Tensor& x) {
  const Tensor branch = lora_branch_forward(layer, x);
  const PackedFp4Tensor qx = quantize_nvfp4(transpose(x), QuantMode::Standard);
  Tensor out = qmatmul(layer.qweight, qx);
  if (layer.rank == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += branch.values[i];
  return out;
}

}  // namespace fp4stream
