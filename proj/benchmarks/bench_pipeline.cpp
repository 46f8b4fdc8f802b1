// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "fp4stream/balanced_sp.hpp"
#include "fp4stream/pipeline.hpp"

namespace {

using namespace fp4stream;

void BM_SimulateStreaming(benchmark::State& state) {
  PipelineConfig c;
  c.chunks = static_cast<std::size_t>(state.range(0));
  c.t_dit = 1.0;
  c.t_vae = 1.7;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(c));
}
BENCHMARK(BM_SimulateStreaming)->Arg(20)->Arg(1000);

void BM_NaturalMask(benchmark::State& state) {
  SpLayout l;
  l.ranks = 4;
  l.seq_len = 1024;
  l.heads = 4;
  l.num_blocks = 8;
  for (auto _ : state) {
    std::size_t visible = 0;
    for (std::size_t i = 0; i < l.seq_len; ++i)
      for (std::size_t j = 0; j < l.seq_len; ++j) visible += natural_mask(i, j, l);
    benchmark::DoNotOptimize(visible);
  }
}
BENCHMARK(BM_NaturalMask)->Unit(benchmark::kMillisecond);

}  // namespace
