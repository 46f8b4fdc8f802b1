// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/nvfp4.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "fp4stream/error.hpp"
#include "fp4stream/rht.hpp"

namespace fp4stream {

namespace {

constexpr double kGlobalDivisor = kE4m3Max * kE2m1Max;  // 2688

struct BlockEncoding {
  std::vector<E2m1Code> codes;
  double squared_error = 0.0;
};

double reconstruct(E2m1Code code, E4m3Code scale, double global_scale) {
  if ((scale.bits & 0x7F) == 0) return 0.0;
  return decode_e2m1(code) * decode_e4m3(scale) * global_scale;
}

BlockEncoding encode_block(std::span<const double> block, double global_scale, E4m3Code scale) {
  BlockEncoding enc;
  enc.codes.resize(block.size());
  if ((scale.bits & 0x7F) == 0) {
    for (double u : block) enc.squared_error += u * u;
    return enc;
  }
  const double s = decode_e4m3(scale);
  for (std::size_t i = 0; i < block.size(); ++i) {
    const double normalized = block[i] / global_scale;
    enc.codes[i] = encode_e2m1(normalized / s);
    const double err = block[i] - reconstruct(enc.codes[i], scale, global_scale);
    enc.squared_error += err * err;
  }
  return enc;
}

double normalized_max(std::span<const double> block, double global_scale) {
  double m = 0.0;
  for (double u : block) m = std::max(m, std::abs(u / global_scale));
  return m;
}

void check_block(std::span<const double> block) {
  if (block.size() > kFp4BlockSize) {
    throw Error(ErrorCode::InvalidArgument, "block longer than 16 elements");
  }
}

void require_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFinite, "non-finite value at index " + std::to_string(i));
    }
  }
}

}  // namespace

float nvfp4_global_scale(std::span<const double> values) {
  double amax = 0.0;
  for (double v : values) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) return 1.0f;
  const auto g = static_cast<float>(amax / kGlobalDivisor);
  if (!std::isfinite(g)) {
    throw Error(ErrorCode::NonFinite, "non-finite global scale: amax exceeds float32 range");
  }
  if (g == 0.0f) return std::numeric_limits<float>::denorm_min();
  return g;
}

E4m3Code block_scale_candidate(double normalized_block_max, ScaleTarget target) {
  if (normalized_block_max == 0.0) return E4m3Code{0};
  const E4m3Code cast = encode_e4m3(normalized_block_max / static_cast<double>(target));
  if (cast.bits == 0) return E4m3Code{0x01};
  return cast;
}

BlockScaleChoice standard_block_scale(std::span<const double> block, double global_scale) {
  check_block(block);
  const E4m3Code scale =
      block_scale_candidate(normalized_max(block, global_scale), ScaleTarget::Six);
  return {scale, ScaleTarget::Six, encode_block(block, global_scale, scale).squared_error};
}

BlockScaleChoice select_block_scale(std::span<const double> block, double global_scale) {
  check_block(block);
  const double m = normalized_max(block, global_scale);
  const E4m3Code six = block_scale_candidate(m, ScaleTarget::Six);
  const E4m3Code four = block_scale_candidate(m, ScaleTarget::Four);
  const double err_six = encode_block(block, global_scale, six).squared_error;
  if (four == six) return {six, ScaleTarget::Six, err_six};
  const double err_four = encode_block(block, global_scale, four).squared_error;
  if (err_four < err_six) return {four, ScaleTarget::Four, err_four};
  return {six, ScaleTarget::Six, err_six};
}

PackedFp4Tensor quantize_nvfp4(const Tensor& x, QuantMode mode, std::optional<float> global_scale) {
  require_finite(x.values);
  if (x.size() != element_count(x.dims)) {
    throw Error(ErrorCode::ShapeMismatch, "tensor values do not match dims");
  }
  if (global_scale && !(std::isfinite(*global_scale) && *global_scale > 0.0f)) {
    throw Error(ErrorCode::InvalidArgument, "global scale override must be positive and finite");
  }

  PackedFp4Tensor q;
  q.dims = x.dims;
  q.global_scale = global_scale ? *global_scale : nvfp4_global_scale(x.values);
  const double g = q.global_scale;

  const std::size_t inner = x.inner();
  const std::size_t outer = x.outer();
  const std::size_t blocks = q.blocks_per_row();
  q.block_scales.reserve(outer * blocks);
  q.block_decisions.reserve(outer * blocks);

  std::vector<E2m1Code> codes(x.size());
  for (std::size_t r = 0; r < outer; ++r) {
    for (std::size_t b = 0; b < blocks; ++b) {
      const std::size_t begin = b * kFp4BlockSize;
      const std::size_t len = std::min(kFp4BlockSize, inner - begin);
      const std::span<const double> block(x.values.data() + r * inner + begin, len);
      const BlockScaleChoice choice = mode == QuantMode::ScaleSearch
                                          ? select_block_scale(block, g)
                                          : standard_block_scale(block, g);
      const BlockEncoding enc = encode_block(block, g, choice.scale);
      std::copy(enc.codes.begin(), enc.codes.end(), codes.begin() + static_cast<std::ptrdiff_t>(r * inner + begin));
      q.block_scales.push_back(choice.scale);
      q.block_decisions.push_back(choice.target);
    }
  }
  q.codes = pack_nibbles(codes);
  return q;
}

double dequantized_element(const PackedFp4Tensor& q, std::size_t index) {
  const std::size_t inner = q.inner();
  const std::size_t row = index / inner;
  const std::size_t block = (index % inner) / kFp4BlockSize;
  return reconstruct(q.code(index), q.block_scale(row, block), q.global_scale);
}

Tensor dequantize_nvfp4(const PackedFp4Tensor& q) {
  Tensor out(q.dims);
  const std::size_t inner = q.inner();
  const std::size_t blocks = q.blocks_per_row();
  const double g = q.global_scale;
  for (std::size_t r = 0; r < q.outer(); ++r) {
    for (std::size_t b = 0; b < blocks; ++b) {
      const E4m3Code scale = q.block_scales[r * blocks + b];
      const std::size_t begin = r * inner + b * kFp4BlockSize;
      const std::size_t end = r * inner + std::min(inner, (b + 1) * kFp4BlockSize);
      for (std::size_t i = begin; i < end; ++i) {
        out.values[i] = reconstruct(q.code(i), scale, g);
      }
    }
  }
  return out;
}

std::size_t storage_bytes(const PackedFp4Tensor& q) {
  return q.codes.size() + q.block_scales.size() + sizeof(float);
}

QuantReport quant_error_report(const Tensor& x, QuantMode mode, const RhtContext* rht) {
  QuantReport report;
  PackedFp4Tensor q = rht ? quantize_nvfp4(rht_forward(x, *rht), mode) : quantize_nvfp4(x, mode);
  Tensor recon = dequantize_nvfp4(q);
  if (rht) recon = rht_inverse(recon, *rht);
  report.mse = mean_squared_error(x, recon);
  report.max_abs_err = max_abs_error(x, recon);
  if (!q.block_decisions.empty()) {
    const auto fours = std::count(q.block_decisions.begin(), q.block_decisions.end(), ScaleTarget::Four);
    report.fraction_blocks_scale4 =
        static_cast<double>(fours) / static_cast<double>(q.block_decisions.size());
  }
  return report;
}

TensorFile to_tensor_file(const PackedFp4Tensor& q) {
  TensorFile file;
  file.dtype = DType::PackedFp4;
  file.dims.assign(q.dims.begin(), q.dims.end());
  file.payload.reserve(storage_bytes(q));
  file.payload.insert(file.payload.end(), q.codes.begin(), q.codes.end());
  for (E4m3Code s : q.block_scales) file.payload.push_back(s.bits);
  const auto g = std::bit_cast<std::uint32_t>(q.global_scale);
  for (int i = 0; i < 4; ++i) file.payload.push_back(static_cast<std::uint8_t>(g >> (8 * i)));
  return file;
}

PackedFp4Tensor from_tensor_file(const TensorFile& file) {
  if (file.dtype != DType::PackedFp4) {
    throw Error(ErrorCode::BadDtype, "bad dtype: expected packed-fp4");
  }
  if (file.payload.size() != expected_payload_size(file.dtype, file.dims)) {
    throw Error(ErrorCode::TruncatedPayload, "truncated payload: size does not match dims");
  }
  PackedFp4Tensor q;
  q.dims.assign(file.dims.begin(), file.dims.end());
  const std::size_t code_bytes = (q.size() + 1) / 2;
  const std::size_t scale_count = q.outer() * q.blocks_per_row();
  q.codes.assign(file.payload.begin(), file.payload.begin() + static_cast<std::ptrdiff_t>(code_bytes));
  q.block_scales.reserve(scale_count);
  for (std::size_t i = 0; i < scale_count; ++i) {
    const E4m3Code s{file.payload[code_bytes + i]};
    if (is_nan(s)) throw Error(ErrorCode::NonFinite, "block scale is an E4M3 NaN pattern");
    q.block_scales.push_back(s);
  }
  std::uint32_t g = 0;
  for (int i = 0; i < 4; ++i) {
    g |= static_cast<std::uint32_t>(file.payload[code_bytes + scale_count + i]) << (8 * i);
  }
  q.global_scale = std::bit_cast<float>(g);
  return q;
}

}  // namespace fp4stream
