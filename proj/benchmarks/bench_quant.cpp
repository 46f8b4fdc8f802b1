// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "fp4stream/nvfp4.hpp"
#include "fp4stream/qcompute.hpp"
#include "fp4stream/rht.hpp"

namespace {

using namespace fp4stream;

Tensor gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t({rows, cols});
  for (double& v : t.values) v = normal(rng);
  return t;
}

void BM_QuantizeStandard(benchmark::State& state) {
  const Tensor x = gaussian(static_cast<std::size_t>(state.range(0)), 1024, 1);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_nvfp4(x, QuantMode::Standard));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_QuantizeStandard)->Arg(16)->Arg(256);

void BM_QuantizeScaleSearch(benchmark::State& state) {
  const Tensor x = gaussian(static_cast<std::size_t>(state.range(0)), 1024, 1);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_nvfp4(x, QuantMode::ScaleSearch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_QuantizeScaleSearch)->Arg(16)->Arg(256);

void BM_QuantizeRotated(benchmark::State& state) {
  const Tensor x = gaussian(static_cast<std::size_t>(state.range(0)), 1024, 1);
  const RhtContext ctx(7);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_nvfp4(rht_forward(x, ctx), QuantMode::ScaleSearch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_QuantizeRotated)->Arg(16)->Arg(256);

void BM_Dequantize(benchmark::State& state) {
  const PackedFp4Tensor q = quantize_nvfp4(gaussian(256, 1024, 2), QuantMode::ScaleSearch);
  for (auto _ : state) benchmark::DoNotOptimize(dequantize_nvfp4(q));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q.size()));
}
BENCHMARK(BM_Dequantize);

void BM_Qmatmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PackedFp4Tensor a = quantize_nvfp4(gaussian(n, n, 3), QuantMode::Standard);
  const PackedFp4Tensor b = quantize_nvfp4(gaussian(n, n, 4), QuantMode::ScaleSearch);
  for (auto _ : state) benchmark::DoNotOptimize(qmatmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Qmatmul)->Arg(64)->Arg(256);

}  // namespace
