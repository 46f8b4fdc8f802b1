// SPDX-License-Identifier: Apache-2.0
//
// sp-check, mask-dump and comm-report.

#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "command.hpp"
#include "fp4stream/balanced_sp.hpp"
#include "fp4stream/error.hpp"

namespace fp4cli {
namespace {

using namespace fp4stream;

struct LayoutOptions {
  std::size_t ranks = 1;
  std::size_t seq_len = 16;
  std::optional<std::size_t> heads;
  std::size_t head_dim = 16;
  std::optional<std::size_t> chunks;
};

void add_layout_options(CLI::App& app, LayoutOptions& o) {
  app.add_option("--P", o.ranks, "SP group size")->check(CLI::PositiveNumber);
  app.add_option("--L", o.seq_len, "Sequence length, clean + noisy")->check(CLI::PositiveNumber);
  app.add_option("--H", o.heads, "Attention heads (default P)");
  app.add_option("--d", o.head_dim, "Head dimension")->check(CLI::PositiveNumber);
  app.add_option("--chunks", o.chunks, "Temporal chunks (default P)")->check(CLI::PositiveNumber);
}

SpLayout to_layout(const LayoutOptions& o, std::size_t halo = 0) {
  SpLayout l;
  l.ranks = o.ranks;
  l.seq_len = o.seq_len;
  l.heads = o.heads.value_or(o.ranks);
  l.head_dim = o.head_dim;
  l.num_blocks = o.chunks.value_or(o.ranks);
  l.halo_frames = halo;
  validate(l);
  return l;
}

Json layout_json(const SpLayout& l) {
  return {{"P", l.ranks}, {"L", l.seq_len}, {"H", l.heads}, {"d", l.head_dim}, {"chunks", l.num_blocks}};
}

// Teacher-forcing mask in the logical [all clean; all noisy] order.
bool logical_mask(std::size_t a, std::size_t b, const SpLayout& l) {
  const std::size_t half = l.temporal_len();
  return teacher_forcing_mask(a % half, a < half, b % half, b < half, Chunking{l.tokens_per_block()});
}

std::string pbm(const SpLayout& l, bool natural, const std::string& label) {
  std::ostringstream os;
  os << "P1\n# " << label << " mask, 1 = visible\n" << l.seq_len << ' ' << l.seq_len << '\n';
  for (std::size_t i = 0; i < l.seq_len; ++i) {
    for (std::size_t j = 0; j < l.seq_len; ++j) {
      const bool on = natural ? natural_mask(i, j, l) : logical_mask(i, j, l);
      os << (on ? '1' : '0') << (j + 1 < l.seq_len ? " " : "\n");
    }
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::vector<Tensor> shard_data(const SpLayout& l, std::optional<std::uint64_t> seed) {
  std::vector<Tensor> shards;
  std::mt19937_64 rng(seed.value_or(0));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t local = l.seq_len / l.ranks;
  double ramp = 0.0;
  for (std::size_t p = 0; p < l.ranks; ++p) {
    Tensor t({local, l.heads, l.head_dim});
    for (double& v : t.values) v = seed ? normal(rng) : (ramp += 1.0);
    shards.push_back(std::move(t));
  }
  return shards;
}

Tensor frame_data(std::size_t frames, std::size_t width, std::optional<std::uint64_t> seed) {
  Tensor t({frames, width});
  std::mt19937_64 rng(seed.value_or(0) ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) t.values[i] = seed ? normal(rng) : static_cast<double>(i % 7) - 3.0;
  return t;
}

struct SpCheckOptions {
  LayoutOptions layout;
  std::optional<std::size_t> halo;
  std::size_t receptive_field = 1;
  std::optional<std::uint64_t> seed;
};

struct MaskDumpOptions {
  LayoutOptions layout;
  std::optional<std::string> natural_path;
  std::optional<std::string> logical_path;
};

}  // namespace

void add_sp_commands(CLI::App& root, Registry& registry) {
  {
    auto opt = std::make_shared<SpCheckOptions>();
    Command& cmd = add_command(root, registry, "sp-check", "Exhaustive checks of the balanced SP layout");
    add_layout_options(*cmd.app, opt->layout);
    cmd.app->add_option("--halo", opt->halo, "Halo frames (default receptive field - 1)");
    cmd.app->add_option("--receptive-field", opt->receptive_field, "Encoder receptive field in frames")
        ->check(CLI::PositiveNumber);
    cmd.app->add_option("--seed", opt->seed, "Random data instead of the deterministic ramp");
    cmd.run = [opt] {
      const std::size_t halo = opt->halo.value_or(opt->receptive_field - 1);
      const SpLayout l = to_layout(opt->layout, halo);
      const std::size_t L = l.seq_len;

      std::set<std::pair<std::size_t, std::size_t>> placements, logical;
      std::vector<std::size_t> noisy(l.ranks, 0);
      for (std::size_t i = 0; i < L; ++i) {
        const TokenIdentity id = token_identity(i, l);
        placements.emplace(id.rank, id.offset);
        logical.emplace(id.temporal, id.is_clean ? 0 : 1);
        if (!id.is_clean) ++noisy[id.rank];
      }
      const bool bijective = placements.size() == L && logical.size() == L;
      bool balanced = true;
      for (std::size_t n : noisy) balanced = balanced && n == l.local_len();

      std::size_t mismatches = 0, visible = 0;
      for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
          const bool nat = natural_mask(i, j, l);
          visible += nat;
          mismatches += nat != logical_mask(logical_index(i, l), logical_index(j, l), l);
        }
      }

      const std::vector<Tensor> shards = shard_data(l, opt->seed);
      const std::vector<Tensor> heads = all_to_all_forward(shards, l);
      const bool round_trip = all_to_all_backward(heads, l) == shards;

      const CausalMovingAverage encoder(opt->receptive_field);
      const Tensor frames = frame_data(l.temporal_len(), l.head_dim, opt->seed);
      const Tensor full = encoder.encode(frames);
      const ShardedEncoding sharded = halo_sharded_encode(frames, l.ranks, halo, encoder);
      bool halo_exact = true;
      const std::size_t per_rank = full.size() / l.ranks;
      for (std::size_t p = 0; p < l.ranks; ++p) {
        const auto& got = sharded.local_latents[p].values;
        halo_exact = halo_exact && std::equal(got.begin(), got.end(), full.values.begin() +
                                                                          static_cast<std::ptrdiff_t>(p * per_rank));
      }
      const CommReport comm = comm_report(l);

      CommandOutput out;
      out.config = layout_json(l);
      out.config["halo"] = halo;
      out.config["receptive_field"] = opt->receptive_field;
      out.config["seed"] = opt->seed ? Json(*opt->seed) : Json();
      out.results = {{"identity_bijective", bijective},
                     {"noisy_tokens_per_rank", noisy},
                     {"loss_balanced", balanced},
                     {"mask_pairs_checked", L * L},
                     {"mask_mismatches", mismatches},
                     {"mask_visible_pairs", visible},
                     {"all_to_all_round_trip", round_trip},
                     {"halo_exact", halo_exact},
                     {"encoded_frames", sharded.encoded_frames},
                     {"comm_bf16_bytes", comm.bf16_bytes},
                     {"comm_nvfp4_bytes", comm.nvfp4_bytes},
                     {"comm_ratio", comm.ratio}};
      const bool ok = bijective && balanced && mismatches == 0 && round_trip && halo_exact;
      out.results["ok"] = ok;
      if (!ok) {
        std::cerr << "sp-check: layout invariants violated\n";
        out.exit_code = 1;
      }
      return out;
    };
  }
  {
    auto opt = std::make_shared<MaskDumpOptions>();
    Command& cmd = add_command(root, registry, "mask-dump", "Write natural and logical masks as PBM bitmaps");
    add_layout_options(*cmd.app, opt->layout);
    cmd.app->add_option("--natural", opt->natural_path, "PBM path for the interleaved-order mask");
    cmd.app->add_option("--logical", opt->logical_path, "PBM path for the logical-order mask");
    cmd.run = [opt] {
      const SpLayout l = to_layout(opt->layout);
      const std::string nat = pbm(l, true, "natural");
      const std::string log = pbm(l, false, "logical");
      CommandOutput out;
      if (opt->natural_path) write_text(*opt->natural_path, nat);
      if (opt->logical_path) write_text(*opt->logical_path, log);
      if (!opt->natural_path || !opt->logical_path) {
        if (!opt->natural_path) std::cout << nat;
        if (!opt->logical_path) std::cout << log;
        out.stdout_taken = true;
      }
      out.config = layout_json(l);
      out.config["natural"] = opt->natural_path ? Json(*opt->natural_path) : Json();
      out.config["logical"] = opt->logical_path ? Json(*opt->logical_path) : Json();
      out.results = {{"size", l.seq_len}, {"tokens_per_chunk", l.tokens_per_block()}};
      return out;
    };
  }
  {
    auto opt = std::make_shared<LayoutOptions>();
    Command& cmd = add_command(root, registry, "comm-report", "Q/K/V All-to-All bytes, bf16 vs NVFP4");
    add_layout_options(*cmd.app, *opt);
    cmd.run = [opt] {
      const SpLayout l = to_layout(*opt);
      const CommReport r = comm_report(l);
      CommandOutput out;
      out.config = layout_json(l);
      out.results = {{"bf16_bytes", r.bf16_bytes}, {"nvfp4_bytes", r.nvfp4_bytes}, {"ratio", r.ratio}};
      return out;
    };
  }
}

}  // namespace fp4cli
