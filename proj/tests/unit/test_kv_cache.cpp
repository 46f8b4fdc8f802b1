// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "fp4stream/error.hpp"
#include "fp4stream/kv_cache.hpp"
#include "fp4stream/sink.hpp"

namespace fp4stream {
namespace {

// Keys with a per-(token, head) offset, as real attention keys have.
Tensor biased_keys(std::size_t tc, std::size_t h, std::size_t d, std::mt19937_64& rng) {
  Tensor k({tc, h, d});
  std::normal_distribution<double> offset(0.0, 3.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t r = 0; r < tc * h; ++r) {
    const double o = offset(rng);
    for (std::size_t u = 0; u < d; ++u) k.values[r * d + u] = o + noise(rng);
  }
  return k;
}

TEST(KvChunk, ConstantKeyRowsSmoothToZero) {
  Tensor k({4, 2, 16});
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t u = 0; u < 16; ++u) k.values[r * 16 + u] = 0.75 * static_cast<double>(r + 1);
  const KvChunk chunk = quantize_kv_chunk(k, Tensor({4, 2, 16}), 0);
  for (std::size_t r = 0; r < 8; ++r) {
    EXPECT_EQ(from_half_bits(chunk.k_means[r]), 0.75 * static_cast<double>(r + 1));
  }
  for (auto s : chunk.qk.block_scales) EXPECT_EQ(s.bits, 0);
  for (auto b : chunk.qk.codes) EXPECT_EQ(b, 0);
  EXPECT_EQ(dequantize_keys(chunk), k);
}

TEST(KvChunk, ZeroChunk) {
  const Tensor z({8, 2, 32});
  const KvChunk chunk = quantize_kv_chunk(z, z, 3);
  EXPECT_EQ(chunk.chunk_index, 3);
  for (auto m : chunk.k_means) EXPECT_EQ(from_half_bits(m), 0.0);
  EXPECT_EQ(dequantize_keys(chunk), z);
  EXPECT_EQ(dequantize_values(chunk), z);
}

TEST(KvChunk, SmoothedRowsAreCenteredBeforeQuantization) {
  std::mt19937_64 rng(8);
  const Tensor k = biased_keys(8, 2, 64, rng);
  const KvChunk chunk = quantize_kv_chunk(k, k, 0);
  for (std::size_t r = 0; r < 16; ++r) {
    double sum = 0.0;
    for (std::size_t u = 0; u < 64; ++u) sum += k.values[r * 64 + u];
    const double mean = sum / 64.0;
    const double stored = from_half_bits(chunk.k_means[r]);
    // The only residual offset is the float16 rounding of the mean.
    EXPECT_LE(std::abs(mean - stored), std::abs(mean) * std::ldexp(1.0, -11) + 1e-7);
  }
}

TEST(KvChunk, ValuesAreNotSmoothed) {
  std::mt19937_64 rng(9);
  const Tensor k = oracle::random_tensor({4, 2, 32}, rng);
  const Tensor v = biased_keys(4, 2, 32, rng);
  const KvChunk chunk = quantize_kv_chunk(k, v, 0);
  const Tensor rows({8, 32}, v.values);
  EXPECT_EQ(chunk.qv, quantize_nvfp4(rows, QuantMode::ScaleSearch));
}

TEST(KvChunk, ShapeMismatchRejected) {
  EXPECT_THROW(quantize_kv_chunk(Tensor({4, 2, 16}), Tensor({4, 2, 32}), 0), Error);
  EXPECT_THROW(quantize_kv_chunk(Tensor({4, 32}), Tensor({4, 32}), 0), Error);
}

TEST(KvChunk, SmoothingBeatsPlainQuantizationOnBiasedKeys) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor k = biased_keys(16, 2, 64, rng);
    const KvChunk chunk = quantize_kv_chunk(k, k, 0);
    const double smoothed = mean_squared_error(dequantize_keys(chunk), k);
    const Tensor rows({32, 64}, k.values);
    const double plain = mean_squared_error(
        dequantize_nvfp4(quantize_nvfp4(rows, QuantMode::Standard)), rows);
    EXPECT_LT(smoothed, plain);
  }
}

TEST(Storage, SmallChunkByteCounts) {
  const KvChunk chunk = quantize_kv_chunk(Tensor({16, 2, 16}), Tensor({16, 2, 16}), 0);
  const StorageReport r = storage_report(chunk, {.include_means = false, .include_global_scales = false});
  EXPECT_EQ(r.bf16_bytes, 2048u);
  EXPECT_EQ(r.code_bytes, 512u);
  EXPECT_EQ(r.scale_bytes, 64u);
  EXPECT_EQ(r.nvfp4_bytes, 576u);
  EXPECT_DOUBLE_EQ(r.ratio, 32.0 / 9.0);
}

TEST(Storage, MeansAndGlobalScalesAccounted) {
  std::mt19937_64 rng(12);
  const Tensor k = oracle::random_tensor({64, 2, 128}, rng);
  const KvChunk chunk = quantize_kv_chunk(k, k, 0);
  const StorageReport payload = storage_report(chunk, {false, false});
  EXPECT_DOUBLE_EQ(payload.ratio, 32.0 / 9.0);
  const StorageReport with_means = storage_report(chunk, {true, false});
  EXPECT_EQ(with_means.mean_bytes, 64u * 2u * 2u);
  // 512 / (144 + 2) per (token, head) row
  EXPECT_DOUBLE_EQ(with_means.ratio, 512.0 / 146.0);
  const StorageReport full = storage_report(chunk);
  EXPECT_EQ(full.nvfp4_bytes, with_means.nvfp4_bytes + 8u);
  EXPECT_EQ(stored_bytes(chunk), full.nvfp4_bytes);
}

class KvCacheTest : public ::testing::Test {
 protected:
  KvChunk make(ChunkIndex index) {
    return quantize_kv_chunk(oracle::random_tensor({8, 2, 32}, rng),
                             oracle::random_tensor({8, 2, 32}, rng), index);
  }
  std::mt19937_64 rng{13};
};

TEST_F(KvCacheTest, WindowConcatenatesInAscendingOrder) {
  KvCache cache;
  for (ChunkIndex c : {2, 0, 1}) cache.append(make(c));
  const std::vector<ChunkIndex> want = {2, 0};
  const KvWindow w = dequantize_window(cache, want);
  ASSERT_EQ(w.keys.dims, (Shape{16, 2, 32}));
  const Tensor k0 = dequantize_keys(cache.at(0));
  const Tensor k2 = dequantize_keys(cache.at(2));
  EXPECT_TRUE(std::equal(k0.values.begin(), k0.values.end(), w.keys.values.begin()));
  EXPECT_TRUE(std::equal(k2.values.begin(), k2.values.end(), w.keys.values.begin() + 512));
}

TEST_F(KvCacheTest, SingleChunkReconstructionMatchesDirectDequant) {
  KvCache cache;
  const Tensor k = oracle::random_tensor({8, 2, 32}, rng);
  const Tensor v = oracle::random_tensor({8, 2, 32}, rng);
  cache.append(quantize_kv_chunk(k, v, 0));
  const std::vector<ChunkIndex> one = {0};
  const KvWindow w = dequantize_window(cache, one);
  // oracle: dequantize the smoothed rows directly and add the stored means
  const KvChunk& c = cache.at(0);
  const Tensor rows = dequantize_nvfp4(c.qk);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ASSERT_EQ(w.keys.values[i], rows.values[i] + from_half_bits(c.k_means[i / 32]));
  }
  EXPECT_LT(mean_squared_error(w.keys, k), 0.05);
  EXPECT_LT(mean_squared_error(w.values, v), 0.05);
}

TEST_F(KvCacheTest, EmptyWindow) {
  KvCache cache;
  const KvWindow w = dequantize_window(cache, {});
  EXPECT_TRUE(w.keys.empty());
  EXPECT_TRUE(w.values.empty());
}

TEST_F(KvCacheTest, ParallelAndSequentialAreBitIdentical) {
  KvCache cache;
  for (ChunkIndex c = 0; c < 6; ++c) cache.append(make(c));
  const std::vector<ChunkIndex> idx = {1, 3, 4, 5};
  const KvWindow seq = dequantize_window(cache, idx, Execution::Sequential);
  const KvWindow par = dequantize_window(cache, idx, Execution::Parallel);
  EXPECT_EQ(seq.keys, par.keys);
  EXPECT_EQ(seq.values, par.values);
}

TEST_F(KvCacheTest, MissingChunkNamed) {
  KvCache cache;
  cache.append(make(0));
  const std::vector<ChunkIndex> idx = {0, 7};
  try {
    dequantize_window(cache, idx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingChunk);
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
}

TEST_F(KvCacheTest, EvictionKeepsSinksAndWindow) {
  KvCache cache;
  SinkState state = make_sink_state({.global_sink_frames = 8, .shot_sink_frames = 8, .window_chunks = 2});
  state = on_prompt_switch(state, 3);
  for (ChunkIndex c = 0; c < 8; ++c) cache.append(make(c));
  state.current = 8;
  cache.evict(state);
  EXPECT_EQ(cache.chunk_indices(), (std::vector<ChunkIndex>{0, 3, 6, 7}));
}

}  // namespace
}  // namespace fp4stream
