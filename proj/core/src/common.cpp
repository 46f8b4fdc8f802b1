// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "fp4stream/error.hpp"
#include "fp4stream/tensor.hpp"

namespace fp4stream {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::BadMagic: return "bad magic";
    case ErrorCode::BadVersion: return "bad version";
    case ErrorCode::BadDtype: return "bad dtype";
    case ErrorCode::TruncatedPayload: return "truncated payload";
    case ErrorCode::BlockMisalignment: return "block misalignment";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::OutOfRange: return "out of range";
    case ErrorCode::MissingChunk: return "missing chunk";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::HaloTooSmall: return "halo smaller than receptive field";
    case ErrorCode::ForeignPosition: return "foreign position";
    case ErrorCode::InconsistentMeasurements: return "inconsistent measurements";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

Tensor transpose(const Tensor& matrix) {
  if (matrix.dims.size() != 2) {
    throw Error(ErrorCode::ShapeMismatch, "transpose expects a matrix");
  }
  const std::size_t rows = matrix.dims[0];
  const std::size_t cols = matrix.dims[1];
  Tensor out({cols, rows});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out.values[c * rows + r] = matrix.values[r * cols + c];
    }
  }
  return out;
}

Tensor matmul(const Tensor& lhs, const Tensor& rhs) {
  if (lhs.dims.size() != 2 || rhs.dims.size() != 2 || lhs.dims[1] != rhs.dims[0]) {
    throw Error(ErrorCode::ShapeMismatch, "matmul shape mismatch");
  }
  const std::size_t m = lhs.dims[0];
  const std::size_t k = lhs.dims[1];
  const std::size_t n = rhs.dims[1];
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double a = lhs.values[i * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        out.values[i * n + j] += a * rhs.values[p * n + j];
      }
    }
  }
  return out;
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "mse operands differ in size");
  }
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double max_abs_error(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "max error operands differ in size");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  }
  return worst;
}

}  // namespace fp4stream
