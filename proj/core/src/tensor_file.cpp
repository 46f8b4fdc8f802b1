// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/tensor_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "fp4stream/error.hpp"
#include "fp4stream/fp_codec.hpp"

namespace fp4stream {

namespace {

constexpr char kMagic[4] = {'N', 'V', 'T', '1'};
constexpr std::size_t kFixedHeader = 7;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t checked_count(std::span<const std::uint64_t> dims) {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    if (d != 0 && n > UINT64_MAX / d) {
      throw Error(ErrorCode::InvalidArgument, "tensor dims overflow");
    }
    n *= d;
  }
  return n;
}

}  // namespace

std::size_t expected_payload_size(DType dtype, std::span<const std::uint64_t> dims) {
  const std::uint64_t n = checked_count(dims);
  switch (dtype) {
    case DType::Float32: return n * 4;
    case DType::Float16: return n * 2;
    case DType::PackedFp4: {
      const std::uint64_t inner = dims.empty() ? 1 : dims.back();
      const std::uint64_t outer = inner == 0 ? 0 : n / inner;
      const std::uint64_t blocks = outer * ((inner + kFp4BlockSize - 1) / kFp4BlockSize);
      return (n + 1) / 2 + blocks + 4;
    }
  }
  throw Error(ErrorCode::BadDtype, "bad dtype");
}

std::vector<std::uint8_t> serialize(const TensorFile& file) {
  if (file.dims.size() > 255) {
    throw Error(ErrorCode::InvalidArgument, "too many dimensions");
  }
  if (file.payload.size() != expected_payload_size(file.dtype, file.dims)) {
    throw Error(ErrorCode::TruncatedPayload, "truncated payload: size does not match dims");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeader + 8 * file.dims.size() + file.payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kTensorFileVersion);
  out.push_back(static_cast<std::uint8_t>(file.dtype));
  out.push_back(static_cast<std::uint8_t>(file.dims.size()));
  for (std::uint64_t d : file.dims) put_u64(out, d);
  out.insert(out.end(), file.payload.begin(), file.payload.end());
  return out;
}

TensorFile parse_tensor_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "bad magic: not an NVT1 tensor file");
  }
  if (bytes.size() < kFixedHeader) {
    throw Error(ErrorCode::TruncatedPayload, "truncated payload: header incomplete");
  }
  if (bytes[4] != kTensorFileVersion) {
    throw Error(ErrorCode::BadVersion, "bad version " + std::to_string(bytes[4]));
  }
  if (bytes[5] > static_cast<std::uint8_t>(DType::PackedFp4)) {
    throw Error(ErrorCode::BadDtype, "bad dtype " + std::to_string(bytes[5]));
  }
  TensorFile file;
  file.dtype = static_cast<DType>(bytes[5]);
  const std::size_t ndim = bytes[6];
  if (bytes.size() < kFixedHeader + 8 * ndim) {
    throw Error(ErrorCode::TruncatedPayload, "truncated payload: dims incomplete");
  }
  for (std::size_t i = 0; i < ndim; ++i) {
    file.dims.push_back(get_u64(bytes.data() + kFixedHeader + 8 * i));
  }
  const std::size_t offset = kFixedHeader + 8 * ndim;
  const std::size_t expected = expected_payload_size(file.dtype, file.dims);
  if (bytes.size() - offset != expected) {
    throw Error(ErrorCode::TruncatedPayload,
                "truncated payload: expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(bytes.size() - offset));
  }
  file.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return file;
}

void write_tensor(const std::filesystem::path& path, const TensorFile& file) {
  const auto bytes = serialize(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

TensorFile read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_tensor_file(bytes);
}

TensorFile encode_real(const Tensor& tensor, DType dtype) {
  TensorFile file;
  file.dtype = dtype;
  file.dims.assign(tensor.dims.begin(), tensor.dims.end());
  switch (dtype) {
    case DType::Float32:
      file.payload.reserve(tensor.size() * 4);
      for (double v : tensor.values) {
        put_u32(file.payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
      break;
    case DType::Float16:
      file.payload.reserve(tensor.size() * 2);
      for (double v : tensor.values) {
        const std::uint16_t h = to_half_bits(v);
        file.payload.push_back(static_cast<std::uint8_t>(h & 0xFF));
        file.payload.push_back(static_cast<std::uint8_t>(h >> 8));
      }
      break;
    case DType::PackedFp4:
      throw Error(ErrorCode::BadDtype, "bad dtype: use to_tensor_file for packed-fp4");
  }
  return file;
}

Tensor decode_real(const TensorFile& file) {
  Shape dims(file.dims.begin(), file.dims.end());
  Tensor out(dims);
  if (file.payload.size() != expected_payload_size(file.dtype, file.dims)) {
    throw Error(ErrorCode::TruncatedPayload, "truncated payload: size does not match dims");
  }
  switch (file.dtype) {
    case DType::Float32:
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] = std::bit_cast<float>(get_u32(file.payload.data() + 4 * i));
      }
      break;
    case DType::Float16:
      for (std::size_t i = 0; i < out.size(); ++i) {
        const auto h = static_cast<std::uint16_t>(file.payload[2 * i] |
                                                  (file.payload[2 * i + 1] << 8));
        out.values[i] = from_half_bits(h);
      }
      break;
    case DType::PackedFp4:
      throw Error(ErrorCode::BadDtype, "bad dtype: packed-fp4 needs dequantization");
  }
  return out;
}

}  // namespace fp4stream
