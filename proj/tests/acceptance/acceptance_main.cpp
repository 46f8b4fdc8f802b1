// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/lora_fit.hpp"
#include "../support/oracles.hpp"
#include "fp4stream/balanced_sp.hpp"
#include "fp4stream/fp_codec.hpp"
#include "fp4stream/kv_cache.hpp"
#include "fp4stream/nvfp4.hpp"
#include "fp4stream/pipeline.hpp"
#include "fp4stream/qcompute.hpp"
#include "fp4stream/rht.hpp"
#include "fp4stream/sink.hpp"

namespace {

using namespace fp4stream;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

double elapsed(Clock::time_point since) { return std::chrono::duration<double>(Clock::now() - since).count(); }

Shape random_matrix_shape(std::mt19937_64& rng, std::size_t max_rows, std::size_t max_cols) {
  std::uniform_int_distribution<std::size_t> rows(1, max_rows), cols(1, max_cols);
  return {rows(rng), cols(rng)};
}

// 1. Codec exhaustiveness against brute-force grids.
void codec_exhaustiveness(Outcome& o) {
  const auto t0 = Clock::now();
  const auto e2m1 = oracle::e2m1_grid();
  const auto e4m3 = oracle::e4m3_grid();
  for (const auto& p : e2m1) {
    o.require(decode_e2m1(E2m1Code{p.bits}) == p.value, "E2M1 decode");
    const std::uint8_t expect = p.bits == 0x8 ? 0x0 : p.bits;  // -0 encodes as +0
    o.require(encode_e2m1(p.value).bits == expect, "E2M1 round trip");
  }
  std::size_t e4m3_codes = 0;
  for (const auto& p : e4m3) {
    o.require(decode_e4m3(E4m3Code{p.bits}) == p.value, "E4M3 decode");
    if (p.bits != 0x80) o.require(encode_e4m3(p.value).bits == p.bits, "E4M3 round trip");
    ++e4m3_codes;
  }
  // nearest-value property on a dense sweep, all midpoints and saturation
  std::vector<double> probes;
  for (int i = -1000; i <= 1000; ++i) probes.push_back(i / 128.0);
  for (std::size_t i = 0; i + 1 < e4m3.size(); ++i) probes.push_back(0.5 * (e4m3[i].value + e4m3[i + 1].value));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> wide(-600.0, 600.0);
  for (int i = 0; i < 20000; ++i) probes.push_back(wide(rng));
  for (double x : probes) {
    o.require(decode_e2m1(encode_e2m1(x)) == oracle::nearest_e2m1(x), "E2M1 nearest");
    o.require(decode_e4m3(encode_e4m3(x)) == oracle::nearest_e4m3(x), "E4M3 nearest");
  }
  const double secs = elapsed(t0);
  o.require(secs < 1.0, "runtime under 1 s");
  o.detail << "16 E2M1 + " << e4m3_codes << " E4M3 codes, " << probes.size() << " probes, " << secs << " s";
}

// 2. Element = decode(code) * decode(scale) * global, bit for bit.
void reconstruction_identity(Outcome& o) {
  static const auto e2m1 = oracle::e2m1_grid();
  static const auto e4m3 = oracle::e4m3_grid();
  auto e4m3_value = [](std::uint8_t bits) {
    return std::find_if(e4m3.begin(), e4m3.end(), [&](const auto& p) { return p.bits == bits; })->value;
  };
  std::mt19937_64 rng(2);
  std::size_t elements = 0;
  for (int n = 0; n < 1000; ++n) {
    const Tensor x = oracle::random_tensor(random_matrix_shape(rng, 64, 256), rng, 0.01 + n % 17);
    const QuantMode mode = n % 2 ? QuantMode::ScaleSearch : QuantMode::Standard;
    const PackedFp4Tensor q = quantize_nvfp4(x, mode);
    const Tensor deq = dequantize_nvfp4(q);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t r = i / q.inner(), b = (i % q.inner()) / 16;
      const double want = e2m1[q.code(i).bits].value * e4m3_value(q.block_scale(r, b).bits) *
                          static_cast<double>(q.global_scale);
      if (deq.values[i] != want) {
        o.require(false, "tensor " + std::to_string(n) + " element " + std::to_string(i));
        return;
      }
    }
    elements += x.size();
  }
  o.detail << "1000 tensors, " << elements << " elements";
}

// 3. Scale search never loses to max-to-6, and picks 4 on the constructed block.
void scale_search_dominance(Outcome& o) {
  std::mt19937_64 rng(3);
  std::size_t strictly_better = 0;
  for (int n = 0; n < 1000; ++n) {
    const Tensor x = oracle::random_tensor(random_matrix_shape(rng, 16, 128), rng);
    const double search = quant_error_report(x, QuantMode::ScaleSearch).mse;
    const double standard = quant_error_report(x, QuantMode::Standard).mse;
    o.require(search <= standard, "tensor " + std::to_string(n));
    strictly_better += search < standard;
  }
  Tensor block({1, 16});
  block.values[0] = 6.0;
  block.values[1] = 4.5;
  const PackedFp4Tensor q = quantize_nvfp4(block, QuantMode::ScaleSearch, 1.0f);
  o.require(q.block_decisions.at(0) == ScaleTarget::Four, "constructed block selects the 4-target");
  o.require(dequantize_nvfp4(q) == block, "constructed block reconstructs exactly");
  o.detail << "1000/1000 tensors search <= standard (" << strictly_better
           << " strictly); [6, 4.5, 0...] -> target 4, scale " << decode_e4m3(q.block_scale(0, 0))
           << ", zero error";
}

// 4. KV byte accounting.
void kv_accounting(Outcome& o) {
  double min_with_means = 1e9;
  for (std::size_t d = 16; d <= 256; d += 16) {
    for (std::size_t tc : {1u, 8u, 64u}) {
      for (std::size_t h : {1u, 4u}) {
        const KvChunk c = quantize_kv_chunk(Tensor({tc, h, d}), Tensor({tc, h, d}), 0);
        const StorageReport r = storage_report(c, {.include_means = false, .include_global_scales = false});
        o.require(r.bf16_bytes * 9 == r.nvfp4_bytes * 32, "payload ratio 32/9 at d=" + std::to_string(d));
      }
    }
  }
  for (std::size_t tc : {64u, 512u}) {
    const KvChunk c = quantize_kv_chunk(Tensor({tc, 8, 128}), Tensor({tc, 8, 128}), 0);
    const double r = storage_report(c).ratio;
    min_with_means = std::min(min_with_means, r);
    o.require(r >= 3.4, "ratio with 16-bit means at d=128");
  }
  o.detail << "payload ratio 32/9 = " << 32.0 / 9.0 << " for d = 16..256; with means and global scales at d=128: "
           << min_with_means;
}

// Layouts of the (P, L) grid with 2..8 chunks that satisfy the divisibility rules.
std::vector<SpLayout> sp_grid() {
  std::vector<SpLayout> out;
  for (std::size_t P : {1u, 2u, 4u})
    for (std::size_t L : {8u, 16u, 32u, 64u})
      for (std::size_t n = 2; n <= 8; ++n) {
        if (L % (2 * P) || n % P || (L / 2) % n) continue;
        SpLayout l;
        l.ranks = P;
        l.seq_len = L;
        l.heads = 2 * P;
        l.head_dim = 3;
        l.num_blocks = n;
        out.push_back(l);
      }
  return out;
}

// Written from the definitions: noisy sees earlier clean chunks and its own
// noisy chunk; clean sees clean chunks up to its own.
bool literal_tf(std::size_t qt, bool qc, std::size_t kt, bool kc, std::size_t tpc) {
  const std::size_t qb = qt / tpc, kb = kt / tpc;
  if (qc) return kc && kb <= qb;
  return kc ? kb < qb : kb == qb;
}

// 5. natural mask == permuted logical mask; token identity is a bijection.
void mask_equivalence(Outcome& o) {
  const auto t0 = Clock::now();
  std::size_t pairs = 0;
  const auto grid = sp_grid();
  for (const SpLayout& l : grid) {
    const std::size_t L = l.seq_len, loc = l.local_len(), half = L / 2;
    // interleaved position -> (temporal, clean) by walking ranks in order
    std::vector<std::pair<std::size_t, bool>> pi;
    for (std::size_t p = 0; p < l.ranks; ++p)
      for (int clean = 1; clean >= 0; --clean)
        for (std::size_t k = 0; k < loc; ++k) pi.emplace_back(p * loc + k, clean == 1);
    std::set<std::pair<std::size_t, bool>> seen;
    for (std::size_t i = 0; i < L; ++i) {
      const TokenIdentity id = token_identity(i, l);
      o.require(id.temporal == pi[i].first && id.is_clean == pi[i].second, "token identity");
      seen.emplace(id.temporal, id.is_clean);
    }
    o.require(seen.size() == L, "bijection");
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j, ++pairs) {
        const bool want = literal_tf(pi[i].first, pi[i].second, pi[j].first, pi[j].second, half / l.num_blocks);
        if (natural_mask(i, j, l) != want) {
          o.require(false, "mask at P=" + std::to_string(l.ranks) + " L=" + std::to_string(L));
          return;
        }
      }
  }
  const double secs = elapsed(t0);
  o.require(secs < 10.0, "runtime under 10 s");
  o.detail << grid.size() << " layouts, " << pairs << " mask pairs, " << secs << " s";
}

// 6. Halo-sharded encoding equals full encoding.
void halo_exactness(Outcome& o) {
  std::mt19937_64 rng(6);
  std::size_t cases = 0;
  for (std::size_t F : {8u, 16u, 32u})
    for (std::size_t P : {1u, 2u, 4u})
      for (std::size_t R : {1u, 2u, 4u}) {
        const std::size_t h = R - 1;
        const Tensor frames = oracle::random_tensor({F, 5}, rng);
        const CausalMovingAverage enc(R);
        const Tensor full = enc.encode(frames);
        const ShardedEncoding s = halo_sharded_encode(frames, P, h, enc);
        const std::size_t per = F / P;
        for (std::size_t p = 0; p < P; ++p) {
          const auto& got = s.local_latents[p].values;
          o.require(std::equal(got.begin(), got.end(), full.values.begin() + static_cast<std::ptrdiff_t>(p * per * 5)),
                    "bit-identical latents");
          o.require(s.encoded_frames[p] == (p == 0 ? per : per + h), "encoded-frame counter");
        }
        ++cases;
      }
  o.detail << cases << " (F, P, R) cases with h = R - 1";
}

// 7. All-to-All round trip and noisy-token balance.
void all_to_all_balance(Outcome& o) {
  std::mt19937_64 rng(7);
  const auto grid = sp_grid();
  for (const SpLayout& l : grid) {
    std::vector<Tensor> shards;
    for (std::size_t p = 0; p < l.ranks; ++p)
      shards.push_back(oracle::random_tensor({l.seq_len / l.ranks, l.heads, l.head_dim}, rng));
    o.require(all_to_all_backward(all_to_all_forward(shards, l), l) == shards, "round trip");
    std::vector<std::size_t> noisy(l.ranks, 0);
    for (std::size_t i = 0; i < l.seq_len; ++i) {
      const TokenIdentity id = token_identity(i, l);
      noisy[id.rank] += !id.is_clean;
    }
    for (std::size_t n : noisy) o.require(n == l.seq_len / (2 * l.ranks), "noisy tokens per rank");
  }
  o.detail << grid.size() << " layouts: round trip exact, every rank holds L/(2P) noisy tokens";
}

// 8. Pipeline simulation vs closed form, calibration, buffer bounds.
void pipeline_model(Outcome& o) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> chunks(1, 50);
  std::uniform_real_distribution<double> lat(0.01, 4.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    PipelineConfig c;
    c.chunks = chunks(rng);
    c.t_dit = lat(rng);
    c.t_vae = lat(rng);
    for (PipelineMode m : {PipelineMode::Centralized, PipelineMode::StreamingAsync}) {
      c.mode = m;
      worst = std::max(worst, std::abs(simulate(c).e2e_latency - closed_form_latency(c)));
    }
  }
  o.require(worst <= 1e-9, "closed form");
  PipelineConfig ten{10, 2.0, 1.0, PipelineMode::StreamingAsync, 1};
  const double async10 = simulate(ten).e2e_latency;
  ten.mode = PipelineMode::Centralized;
  const double sync10 = simulate(ten).e2e_latency;
  o.require(std::abs(async10 - 21.0) < 1e-12 && std::abs(sync10 - 30.0) < 1e-12, "C=10 example");

  const Calibration fit = calibrate(99.5, 57.6, 20);
  PipelineConfig cal{20, fit.t_dit, fit.t_vae, PipelineMode::Centralized, 1};
  const double resync = simulate(cal).e2e_latency;
  cal.mode = PipelineMode::StreamingAsync;
  const double reasync = simulate(cal).e2e_latency;
  o.require(fit.t_dit > 0 && fit.t_vae > 0, "positive fit");
  o.require(std::abs(resync - 99.5) < 1e-6 && std::abs(reasync - 57.6) < 1e-6, "calibration reproduces inputs");

  std::size_t peak_stream = 0;
  for (int i = 0; i < 100; ++i) {
    PipelineConfig c{chunks(rng), 0.0, 0.0, PipelineMode::StreamingAsync, 1};
    c.t_dit = lat(rng);
    c.t_vae = std::uniform_real_distribution<double>(0.0, c.t_dit)(rng);
    peak_stream = std::max(peak_stream, simulate(c).peak_latent_buffer_chunks);
    c.mode = PipelineMode::Centralized;
    o.require(simulate(c).peak_latent_buffer_chunks == c.chunks, "centralized buffers C chunks");
  }
  o.require(peak_stream <= 2, "streaming buffer <= 2");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "max |sim - closed| = %.2e; C=10: %.0f vs %.0f; fit t_dit=%.6f t_vae=%.6f re-sim %.9f/%.9f; "
                "streaming peak %zu",
                worst, async10, sync10, fit.t_dit, fit.t_vae, resync, reasync, peak_stream);
  o.detail << buf;
}

// 9. Q/K/V All-to-All payload ratio.
void comm_accounting(Outcome& o) {
  std::size_t cases = 0;
  for (std::size_t d = 16; d <= 256; d += 16)
    for (std::size_t P : {1u, 2u, 4u, 8u})
      for (std::size_t L : {256u, 4096u}) {
        SpLayout l;
        l.ranks = P;
        l.seq_len = L;
        l.heads = 2 * P;
        l.head_dim = d;
        l.num_blocks = P;
        const CommReport r = comm_report(l);
        o.require(r.bf16_bytes * 9 == r.nvfp4_bytes * 32, "ratio 32/9");
        ++cases;
      }
  o.detail << cases << " layouts at ratio " << 32.0 / 9.0;
}

// 10. W4A4 GEMM and LoRA composition.
void w4a4(Outcome& o) {
  std::mt19937_64 rng(10);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const Shape ak = random_matrix_shape(rng, 256, 256);
    const std::size_t cols = std::uniform_int_distribution<std::size_t>(1, 256)(rng);
    const PackedFp4Tensor a = quantize_nvfp4(oracle::random_tensor(ak, rng), QuantMode::Standard);
    const PackedFp4Tensor b = quantize_nvfp4(oracle::random_tensor({cols, ak[1]}, rng), QuantMode::ScaleSearch);
    const Tensor got = qmatmul(a, b);
    const Tensor want = oracle::dense_matmul_abt(dequantize_nvfp4(a), dequantize_nvfp4(b));
    double scale = 0.0;
    for (double v : want.values) scale = std::max(scale, std::abs(v));
    worst = std::max(worst, scale == 0.0 ? 0.0 : max_abs_error(got, want) / scale);
  }
  o.require(worst <= 1e-6, "GEMM relative error");

  std::size_t improved = 0;
  double mean_gain = 0.0;
  for (int n = 0; n < 20; ++n) {
    const Tensor w = oracle::random_tensor({64, 128}, rng, 0.05);
    const Tensor x = oracle::random_tensor({128, 8}, rng);
    const Tensor exact = matmul(w, x);
    QLinear lora = oracle::fit_residual_lora(w, 16, 16.0);
    QLinear plain = lora;
    plain.rank = 0;
    plain.lora_a = Tensor({0, 128});
    plain.lora_b = Tensor({64, 0});
    const double e_lora = mean_squared_error(qlinear_forward(lora, x), exact);
    const double e_plain = mean_squared_error(qlinear_forward(plain, x), exact);
    improved += e_lora < e_plain;
    mean_gain += e_plain / e_lora / 20.0;
  }
  o.require(improved == 20, "LoRA reduces error on every layer");
  o.detail << "max relative GEMM gap " << worst << "; LoRA r=16 better on " << improved
           << "/20 layers (mean error ratio " << mean_gain << "x)";
}

// 11. RHT orthogonality, round trip, outlier-block corpus.
void rht_checks(Outcome& o) {
  std::mt19937_64 rng(11);
  double ortho = 0.0, round_trip = 0.0;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const RhtContext ctx(seed);
    const auto m = ctx.matrix();
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 16; ++k) dot += m[i * 16 + k] * m[j * 16 + k];
        ortho = std::max(ortho, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
    const Tensor x = oracle::random_tensor({8, 64}, rng, 10.0);
    round_trip = std::max(round_trip, max_abs_error(rht_inverse(rht_forward(x, ctx), ctx), x));
  }
  o.require(ortho <= 1e-12, "orthogonality");
  o.require(round_trip <= 1e-10, "round trip");

  // Corpus: blocks of unit-scale values, each with one outlier of 10..100x.
  const std::size_t blocks = 1000;
  Tensor corpus({blocks, 16});
  std::normal_distribution<double> body(0.0, 1.0);
  std::uniform_real_distribution<double> magnitude(10.0, 100.0);
  std::uniform_int_distribution<std::size_t> lane(0, 15);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t u = 0; u < 16; ++u) corpus.values[b * 16 + u] = body(rng);
    corpus.values[b * 16 + lane(rng)] = (rng() & 1 ? 1.0 : -1.0) * magnitude(rng);
  }
  const RhtContext ctx(2024);
  const Tensor direct = dequantize_nvfp4(quantize_nvfp4(corpus, QuantMode::ScaleSearch));
  const Tensor rotated = rht_inverse(dequantize_nvfp4(quantize_nvfp4(rht_forward(corpus, ctx), QuantMode::ScaleSearch)), ctx);
  std::size_t wins = 0;
  double direct_total = 0.0, rotated_total = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    double ed = 0.0, er = 0.0;
    for (std::size_t u = b * 16; u < b * 16 + 16; ++u) {
      ed += (direct.values[u] - corpus.values[u]) * (direct.values[u] - corpus.values[u]);
      er += (rotated.values[u] - corpus.values[u]) * (rotated.values[u] - corpus.values[u]);
    }
    wins += er < ed;
    direct_total += ed;
    rotated_total += er;
  }
  const double frac = static_cast<double>(wins) / blocks;
  o.require(frac >= 0.9, "rotated MSE below direct MSE on >= 90% of outlier blocks");
  o.detail << "orthogonality " << ortho << ", round trip " << round_trip << "; rotated path wins " << wins << "/"
           << blocks << " blocks (" << 100.0 * frac << "%), mean block MSE direct " << direct_total / (16.0 * blocks)
           << " vs rotated " << rotated_total / (16.0 * blocks);
}

// 12. Scripted sink run against a hand-enumerated trace.
void sink_trace(Outcome& o) {
  const std::vector<std::vector<ChunkIndex>> expected = {
      {},                      // 0
      {0},                     // 1
      {0, 1},                  // 2
      {0, 1, 2},               // 3
      {0, 1, 2, 3},            // 4
      {0, 1, 2, 3, 4},         // 5
      {0, 2, 3, 4, 5},         // 6
      {0, 3, 4, 5, 6},         // 7
      {0, 4, 5, 6, 7},         // 8
      {0, 5, 6, 7, 8},         // 9, prompt switch here
      {0, 6, 7, 8, 9},         // 10
      {0, 7, 8, 9, 10},        // 11
      {0, 8, 9, 10, 11},       // 12
      {0, 9, 10, 11, 12},      // 13
      {0, 9, 10, 11, 12, 13},  // 14
      {0, 9, 11, 12, 13, 14},  // 15
      {0, 9, 12, 13, 14, 15},  // 16
      {0, 9, 13, 14, 15, 16},  // 17
      {0, 9, 14, 15, 16, 17},  // 18
      {0, 9, 15, 16, 17, 18},  // 19
  };
  SinkConfig cfg;
  cfg.global_sink_frames = 8;
  cfg.shot_sink_frames = 8;
  cfg.window_chunks = 4;
  SinkState state = make_sink_state(cfg);
  KvCache cache;
  std::mt19937_64 rng(12);
  std::uint64_t chunk_bytes = 0;
  bool bytes_invariant = true;
  for (ChunkIndex t = 0; t < 20; ++t) {
    if (t == 9) {
      const std::uint64_t before = cache.total_bytes();
      const auto resident = cache.chunk_indices();
      state = on_prompt_switch(state, 9);
      bytes_invariant = bytes_invariant && cache.total_bytes() == before && cache.chunk_indices() == resident;
    }
    const auto eff = sink_effective_set(state);
    o.require(eff == expected[static_cast<std::size_t>(t)], "effective set at t=" + std::to_string(t));
    for (ChunkIndex c : eff) o.require(cache.contains(c), "effective chunk resident at t=" + std::to_string(t));
    const Tensor k = oracle::random_tensor({16, 2, 32}, rng);
    KvChunk chunk = quantize_kv_chunk(k, k, t);
    chunk_bytes = stored_bytes(chunk);
    cache.append(std::move(chunk));
    state = advance(state);
    cache.evict(state);
    // no per-sink overhead: resident bytes are exactly resident chunks x chunk size
    bytes_invariant = bytes_invariant && cache.total_bytes() == cache.size() * chunk_bytes;
  }
  o.require(bytes_invariant, "cache bytes unchanged by shot-pointer moves");
  o.detail << "20-step trace matches; resident bytes = chunks x " << chunk_bytes << " B throughout";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"codec exhaustiveness", codec_exhaustiveness},
      {"block reconstruction identity", reconstruction_identity},
      {"scale search dominance", scale_search_dominance},
      {"KV byte accounting", kv_accounting},
      {"mask equivalence", mask_equivalence},
      {"halo encode exactness", halo_exactness},
      {"all-to-all round trip and balance", all_to_all_balance},
      {"pipeline model", pipeline_model},
      {"communication accounting", comm_accounting},
      {"W4A4 GEMM and LoRA", w4a4},
      {"random Hadamard transform", rht_checks},
      {"sink manager trace", sink_trace},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
