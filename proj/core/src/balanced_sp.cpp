// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/balanced_sp.hpp"

#include <string>

#include "fp4stream/error.hpp"

namespace fp4stream {

namespace {

std::string layout_string(const SpLayout& l) {
  return "P=" + std::to_string(l.ranks) + " L=" + std::to_string(l.seq_len) +
         " H=" + std::to_string(l.heads) + " N_blk=" + std::to_string(l.num_blocks);
}

}  // namespace

void validate(const SpLayout& layout) {
  const auto fail = [&](const char* what) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " (" + layout_string(layout) + ")");
  };
  if (layout.ranks == 0) fail("SP group size must be positive");
  if (layout.seq_len == 0 || layout.seq_len % (2 * layout.ranks) != 0) fail("L must be a positive multiple of 2P");
  if (layout.heads == 0 || layout.heads % layout.ranks != 0) fail("H must be a positive multiple of P");
  if (layout.num_blocks == 0 || layout.num_blocks % layout.ranks != 0) fail("N_blk must be a positive multiple of P");
  if (layout.temporal_len() % layout.num_blocks != 0) fail("N_blk must divide L/2");
}

TokenIdentity token_identity(std::size_t index, const SpLayout& layout) {
  if (index >= layout.seq_len) {
    throw Error(ErrorCode::OutOfRange, "token index " + std::to_string(index) +
                                           " outside [0, " + std::to_string(layout.seq_len) + ")");
  }
  const std::size_t loc = layout.local_len();
  TokenIdentity id;
  id.rank = index / (2 * loc);
  id.offset = index % (2 * loc);
  id.temporal = id.rank * loc + (id.offset % loc);
  id.is_clean = id.offset < loc;
  return id;
}

bool teacher_forcing_mask(std::size_t q_temporal, bool q_is_clean, std::size_t k_temporal,
                          bool k_is_clean, Chunking chunking) {
  const std::size_t qc = chunking.chunk_of(q_temporal);
  const std::size_t kc = chunking.chunk_of(k_temporal);
  if (q_is_clean) return k_is_clean && kc <= qc;
  return k_is_clean ? kc < qc : kc == qc;
}

bool natural_mask(std::size_t i, std::size_t j, const SpLayout& layout) {
  const TokenIdentity q = token_identity(i, layout);
  const TokenIdentity k = token_identity(j, layout);
  return teacher_forcing_mask(q.temporal, q.is_clean, k.temporal, k.is_clean,
                              Chunking{layout.tokens_per_block()});
}

std::size_t logical_index(std::size_t i, const SpLayout& layout) {
  const TokenIdentity id = token_identity(i, layout);
  return id.is_clean ? id.temporal : layout.temporal_len() + id.temporal;
}

std::vector<Tensor> all_to_all_forward(std::span<const Tensor> per_rank, const SpLayout& layout) {
  validate(layout);
  const std::size_t P = layout.ranks;
  const std::size_t local = layout.seq_len / P;
  const std::size_t H = layout.heads;
  const std::size_t Hl = H / P;
  const std::size_t d = layout.head_dim;
  const Shape in_dims{local, H, d};
  if (per_rank.size() != P) {
    throw Error(ErrorCode::ShapeMismatch, "expected one tensor per rank");
  }
  for (const Tensor& t : per_rank) {
    if (t.dims != in_dims) throw Error(ErrorCode::ShapeMismatch, "rank tensor is not (L/P) x H x d");
  }
  std::vector<Tensor> out(P, Tensor(Shape{layout.seq_len, Hl, d}));
  for (std::size_t src = 0; src < P; ++src) {
    for (std::size_t s = 0; s < local; ++s) {
      const std::size_t global = src * local + s;
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t dst = h / Hl;
        const double* from = per_rank[src].values.data() + (s * H + h) * d;
        double* to = out[dst].values.data() + (global * Hl + h % Hl) * d;
        std::copy(from, from + d, to);
      }
    }
  }
  return out;
}

std::vector<Tensor> all_to_all_backward(std::span<const Tensor> per_rank, const SpLayout& layout) {
  validate(layout);
  const std::size_t P = layout.ranks;
  const std::size_t local = layout.seq_len / P;
  const std::size_t H = layout.heads;
  const std::size_t Hl = H / P;
  const std::size_t d = layout.head_dim;
  const Shape in_dims{layout.seq_len, Hl, d};
  if (per_rank.size() != P) {
    throw Error(ErrorCode::ShapeMismatch, "expected one tensor per rank");
  }
  for (const Tensor& t : per_rank) {
    if (t.dims != in_dims) throw Error(ErrorCode::ShapeMismatch, "rank tensor is not L x (H/P) x d");
  }
  std::vector<Tensor> out(P, Tensor(Shape{local, H, d}));
  for (std::size_t src = 0; src < P; ++src) {
    for (std::size_t global = 0; global < layout.seq_len; ++global) {
      const std::size_t dst = global / local;
      const std::size_t s = global % local;
      for (std::size_t hl = 0; hl < Hl; ++hl) {
        const std::size_t h = src * Hl + hl;
        const double* from = per_rank[src].values.data() + (global * Hl + hl) * d;
        double* to = out[dst].values.data() + (s * H + h) * d;
        std::copy(from, from + d, to);
      }
    }
  }
  return out;
}

CausalMovingAverage::CausalMovingAverage(std::size_t receptive_field)
    : receptive_field_(receptive_field) {
  if (receptive_field == 0) {
    throw Error(ErrorCode::InvalidArgument, "receptive field must be at least 1");
  }
}

Tensor CausalMovingAverage::encode(const Tensor& frames) const {
  if (frames.dims.size() != 2) {
    throw Error(ErrorCode::ShapeMismatch, "frames must be F x D");
  }
  const std::size_t F = frames.dims[0];
  const std::size_t D = frames.dims[1];
  const auto R = static_cast<double>(receptive_field_);
  Tensor out({F, D});
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t c = 0; c < D; ++c) {
      double sum = 0.0;
      for (std::size_t k = 0; k < receptive_field_; ++k) {
        sum += (f >= k) ? frames.values[(f - k) * D + c] : 0.0;
      }
      out.values[f * D + c] = sum / R;
    }
  }
  return out;
}

ShardedEncoding halo_sharded_encode(const Tensor& frames, std::size_t ranks,
                                    std::size_t halo_frames,
                                    const CausalMovingAverage& encoder) {
  if (frames.dims.size() != 2) {
    throw Error(ErrorCode::ShapeMismatch, "frames must be F x D");
  }
  const std::size_t F = frames.dims[0];
  const std::size_t D = frames.dims[1];
  if (ranks == 0 || F % ranks != 0) {
    throw Error(ErrorCode::InvalidArgument, "frame count " + std::to_string(F) +
                                                " is not divisible by P=" + std::to_string(ranks));
  }
  if (halo_frames + 1 < encoder.receptive_field()) {
    throw Error(ErrorCode::HaloTooSmall,
                "halo smaller than receptive field: h=" + std::to_string(halo_frames) +
                    " < R-1=" + std::to_string(encoder.receptive_field() - 1));
  }
  const std::size_t per_rank = F / ranks;
  ShardedEncoding result;
  for (std::size_t p = 0; p < ranks; ++p) {
    const std::size_t halo = p == 0 ? 0 : halo_frames;
    const std::size_t count = per_rank + halo;
    const auto first = static_cast<std::ptrdiff_t>(p * per_rank) - static_cast<std::ptrdiff_t>(halo);
    Tensor window({count, D});
    for (std::size_t w = 0; w < count; ++w) {
      const std::ptrdiff_t f = first + static_cast<std::ptrdiff_t>(w);
      if (f < 0) continue;  // before the sequence start: zero frame
      std::copy_n(frames.values.begin() + f * static_cast<std::ptrdiff_t>(D), D,
                  window.values.begin() + static_cast<std::ptrdiff_t>(w * D));
    }
    const Tensor latents = encoder.encode(window);
    result.local_latents.emplace_back(
        Shape{per_rank, D},
        std::vector<double>(latents.values.begin() + static_cast<std::ptrdiff_t>(halo * D),
                            latents.values.end()));
    result.encoded_frames.push_back(count);
  }
  return result;
}

std::uint64_t comm_volume(const SpLayout& layout, CommPrecision precision) {
  const std::uint64_t rows = 3ULL * layout.seq_len * layout.heads;
  const std::uint64_t d = layout.head_dim;
  switch (precision) {
    case CommPrecision::Bf16: return rows * d * 2;
    case CommPrecision::Nvfp4: return rows * ((d + 1) / 2 + (d + 15) / 16);
  }
  return 0;
}

CommReport comm_report(const SpLayout& layout) {
  CommReport r;
  r.bf16_bytes = comm_volume(layout, CommPrecision::Bf16);
  r.nvfp4_bytes = comm_volume(layout, CommPrecision::Nvfp4);
  r.ratio = r.nvfp4_bytes == 0 ? 0.0
                               : static_cast<double>(r.bf16_bytes) / static_cast<double>(r.nvfp4_bytes);
  return r;
}

}  // namespace fp4stream
