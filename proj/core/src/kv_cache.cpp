// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/kv_cache.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

#include "fp4stream/error.hpp"
#include "fp4stream/sink.hpp"

namespace fp4stream {

namespace {

void require_kv_shape(const Tensor& t, const char* name) {
  if (t.dims.size() != 3) {
    throw Error(ErrorCode::ShapeMismatch, std::string(name) + " must be T_c x H x d");
  }
}

Tensor as_rows(const Tensor& t) {
  return Tensor({t.dims[0] * t.dims[1], t.dims[2]}, t.values);
}

}  // namespace

KvChunk quantize_kv_chunk(const Tensor& k, const Tensor& v, ChunkIndex chunk_index) {
  require_kv_shape(k, "keys");
  require_kv_shape(v, "values");
  if (k.dims != v.dims) {
    throw Error(ErrorCode::ShapeMismatch, "keys and values differ in shape");
  }
  KvChunk chunk;
  chunk.chunk_index = chunk_index;
  chunk.tokens = k.dims[0];
  chunk.heads = k.dims[1];
  chunk.head_dim = k.dims[2];

  // K-smoothing: subtract the per-(token, head) mean along d. The stored
  // float16 mean is the one subtracted so that restoring it is exact.
  Tensor smoothed = as_rows(k);
  const std::size_t rows = smoothed.outer();
  const std::size_t d = chunk.head_dim;
  chunk.k_means.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = smoothed.row(r);
    double sum = 0.0;
    for (double x : row) {
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "non-finite key");
      sum += x;
    }
    const double mean = d == 0 ? 0.0 : sum / static_cast<double>(d);
    chunk.k_means[r] = to_half_bits(mean);
    const double stored = from_half_bits(chunk.k_means[r]);
    for (double& x : row) x -= stored;
  }
  chunk.qk = quantize_nvfp4(smoothed, QuantMode::ScaleSearch);
  chunk.qv = quantize_nvfp4(as_rows(v), QuantMode::ScaleSearch);
  return chunk;
}

Tensor dequantize_keys(const KvChunk& chunk) {
  Tensor rows = dequantize_nvfp4(chunk.qk);
  for (std::size_t r = 0; r < rows.outer(); ++r) {
    const double mean = from_half_bits(chunk.k_means[r]);
    for (double& x : rows.row(r)) x += mean;
  }
  return Tensor({chunk.tokens, chunk.heads, chunk.head_dim}, std::move(rows.values));
}

Tensor dequantize_values(const KvChunk& chunk) {
  Tensor rows = dequantize_nvfp4(chunk.qv);
  return Tensor({chunk.tokens, chunk.heads, chunk.head_dim}, std::move(rows.values));
}

StorageReport storage_report(const KvChunk& chunk, StorageAccounting accounting) {
  StorageReport r;
  const std::uint64_t elements =
      static_cast<std::uint64_t>(chunk.tokens) * chunk.heads * chunk.head_dim;
  r.bf16_bytes = 2 * elements * 2;
  r.code_bytes = chunk.qk.codes.size() + chunk.qv.codes.size();
  r.scale_bytes = chunk.qk.block_scales.size() + chunk.qv.block_scales.size();
  r.global_scale_bytes = 2 * sizeof(float);
  r.mean_bytes = chunk.k_means.size() * sizeof(std::uint16_t);
  r.nvfp4_bytes = r.code_bytes + r.scale_bytes;
  if (accounting.include_global_scales) r.nvfp4_bytes += r.global_scale_bytes;
  if (accounting.include_means) r.nvfp4_bytes += r.mean_bytes;
  r.ratio = r.nvfp4_bytes == 0 ? 0.0
                               : static_cast<double>(r.bf16_bytes) / static_cast<double>(r.nvfp4_bytes);
  return r;
}

std::uint64_t stored_bytes(const KvChunk& chunk) { return storage_report(chunk).nvfp4_bytes; }

void KvCache::append(KvChunk chunk) {
  const ChunkIndex index = chunk.chunk_index;
  if (!chunks_.empty()) {
    const KvChunk& first = chunks_.begin()->second;
    if (first.heads != chunk.heads || first.head_dim != chunk.head_dim) {
      throw Error(ErrorCode::ShapeMismatch, "chunk head layout differs from cache");
    }
  }
  chunks_.insert_or_assign(index, std::move(chunk));
}

const KvChunk& KvCache::at(ChunkIndex index) const {
  const auto it = chunks_.find(index);
  if (it == chunks_.end()) {
    throw Error(ErrorCode::MissingChunk, "missing chunk " + std::to_string(index));
  }
  return it->second;
}

std::vector<ChunkIndex> KvCache::chunk_indices() const {
  std::vector<ChunkIndex> out;
  out.reserve(chunks_.size());
  for (const auto& [index, chunk] : chunks_) out.push_back(index);
  return out;
}

std::vector<ChunkIndex> KvCache::evict(const SinkState& state) {
  const std::vector<ChunkIndex> keep = sink_effective_set(state);
  std::vector<ChunkIndex> evicted;
  for (auto it = chunks_.begin(); it != chunks_.end();) {
    const ChunkIndex index = it->first;
    if (index < state.current && !std::binary_search(keep.begin(), keep.end(), index)) {
      evicted.push_back(index);
      it = chunks_.erase(it);
    } else {
      ++it;
    }
  }
  return evicted;
}

std::uint64_t KvCache::total_bytes() const {
  std::uint64_t total = 0;
  for (const auto& [index, chunk] : chunks_) total += stored_bytes(chunk);
  return total;
}

KvWindow dequantize_window(const KvCache& cache, std::span<const ChunkIndex> indices,
                           Execution execution) {
  std::vector<ChunkIndex> order(indices.begin(), indices.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());

  std::vector<const KvChunk*> chunks;
  chunks.reserve(order.size());
  for (ChunkIndex index : order) chunks.push_back(&cache.at(index));

  KvWindow window;
  if (chunks.empty()) {
    window.keys = Tensor(Shape{0, 0, 0});
    window.values = Tensor(Shape{0, 0, 0});
    return window;
  }
  const std::size_t heads = chunks.front()->heads;
  const std::size_t head_dim = chunks.front()->head_dim;
  std::vector<std::size_t> offsets;
  std::size_t tokens = 0;
  for (const KvChunk* c : chunks) {
    offsets.push_back(tokens * heads * head_dim);
    tokens += c->tokens;
  }
  window.keys = Tensor({tokens, heads, head_dim});
  window.values = Tensor({tokens, heads, head_dim});

  auto fill = [&](std::size_t i) {
    const Tensor k = dequantize_keys(*chunks[i]);
    const Tensor v = dequantize_values(*chunks[i]);
    std::copy(k.values.begin(), k.values.end(), window.keys.values.begin() + static_cast<std::ptrdiff_t>(offsets[i]));
    std::copy(v.values.begin(), v.values.end(), window.values.values.begin() + static_cast<std::ptrdiff_t>(offsets[i]));
  };

  if (execution == Execution::Sequential) {
    for (std::size_t i = 0; i < chunks.size(); ++i) fill(i);
  } else {
    std::vector<std::future<void>> jobs;
    jobs.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      jobs.push_back(std::async(std::launch::async, fill, i));
    }
    for (auto& job : jobs) job.get();
  }
  return window;
}

}  // namespace fp4stream
