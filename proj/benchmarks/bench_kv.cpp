// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "fp4stream/kv_cache.hpp"

namespace {

using namespace fp4stream;

Tensor gaussian(std::size_t t, std::size_t h, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor x({t, h, d});
  for (double& v : x.values) v = normal(rng);
  return x;
}

void BM_QuantizeKvChunk(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Tensor k = gaussian(512, 8, 128, rng), v = gaussian(512, 8, 128, rng);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_kv_chunk(k, v, 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * k.size()));
}
BENCHMARK(BM_QuantizeKvChunk)->Unit(benchmark::kMillisecond);

void DequantizeWindow(benchmark::State& state, Execution exec) {
  std::mt19937_64 rng(2);
  KvCache cache;
  std::vector<ChunkIndex> window;
  for (ChunkIndex c = 0; c < static_cast<ChunkIndex>(state.range(0)); ++c) {
    cache.append(quantize_kv_chunk(gaussian(512, 8, 128, rng), gaussian(512, 8, 128, rng), c));
    window.push_back(c);
  }
  for (auto _ : state) benchmark::DoNotOptimize(dequantize_window(cache, window, exec));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2 * 512 * 8 * 128);
}

void BM_DequantizeWindowSequential(benchmark::State& state) { DequantizeWindow(state, Execution::Sequential); }
void BM_DequantizeWindowParallel(benchmark::State& state) { DequantizeWindow(state, Execution::Parallel); }
BENCHMARK(BM_DequantizeWindowSequential)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DequantizeWindowParallel)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace
