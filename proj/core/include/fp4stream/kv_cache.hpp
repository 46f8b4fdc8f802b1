// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "fp4stream/nvfp4.hpp"
#include "fp4stream/tensor.hpp"

namespace fp4stream {

struct SinkState;

using ChunkIndex = std::int64_t;

inline constexpr std::size_t kFramesPerChunk = 8;
inline constexpr std::size_t kDefaultTokensPerFrame = 64;

/// One temporal chunk of keys and values, stored as two (T_c * H) x d NVFP4
/// tensors. Keys are mean-centred per (token, head) before quantization and
/// the float16 means are kept alongside.
struct KvChunk {
  ChunkIndex chunk_index = 0;
  std::size_t tokens = 0;  // T_c
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  PackedFp4Tensor qk;
  PackedFp4Tensor qv;
  std::vector<std::uint16_t> k_means;  // float16 bits, one per (token, head)
};

/// k and v are T_c x H x d.
KvChunk quantize_kv_chunk(const Tensor& k, const Tensor& v, ChunkIndex chunk_index);

/// Keys with their means restored, and values; both T_c x H x d.
Tensor dequantize_keys(const KvChunk& chunk);
Tensor dequantize_values(const KvChunk& chunk);

struct StorageAccounting {
  bool include_means = true;
  bool include_global_scales = true;
};

struct StorageReport {
  std::uint64_t bf16_bytes = 0;
  std::uint64_t code_bytes = 0;
  std::uint64_t scale_bytes = 0;
  std::uint64_t global_scale_bytes = 0;
  std::uint64_t mean_bytes = 0;
  std::uint64_t nvfp4_bytes = 0;  // sum of the components selected by the accounting
  double ratio = 0.0;             // bf16_bytes / nvfp4_bytes
};

StorageReport storage_report(const KvChunk& chunk, StorageAccounting accounting = {});

std::uint64_t stored_bytes(const KvChunk& chunk);

/// Chunk-indexed store of quantized KV. Single writer; concurrent readers are
/// fine as long as nothing appends or evicts.
class KvCache {
 public:
  void append(KvChunk chunk);

  bool contains(ChunkIndex index) const { return chunks_.contains(index); }
  const KvChunk& at(ChunkIndex index) const;

  std::vector<ChunkIndex> chunk_indices() const;
  std::size_t size() const { return chunks_.size(); }

  /// Drops every chunk that is neither in the effective set for the state's
  /// current step nor at/after that step. Returns the evicted indices.
  std::vector<ChunkIndex> evict(const SinkState& state);

  std::uint64_t total_bytes() const;

 private:
  std::map<ChunkIndex, KvChunk> chunks_;
};

enum class Execution { Sequential, Parallel };

struct KvWindow {
  Tensor keys;    // (sum T_c) x H x d
  Tensor values;
};

/// Reconstructs the requested chunks in ascending index order. Parallel
/// execution produces bit-identical output to sequential.
KvWindow dequantize_window(const KvCache& cache, std::span<const ChunkIndex> indices,
                           Execution execution = Execution::Sequential);

}  // namespace fp4stream
