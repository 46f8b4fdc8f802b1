// SPDX-License-Identifier: Apache-2.0
//
// Balanced sequence-parallel layout arithmetic.
//
// Each of P ranks owns the clean and noisy tokens of the same temporal slice,
// so after the Ulysses All-to-All the global token order is
//
//   [clean(0), noisy(0), clean(1), noisy(1), ..., clean(P-1), noisy(P-1)]
//
// with L_loc = L / (2P) tokens per segment. Masks are evaluated directly on
// that order through token_identity(); no tensor is ever permuted.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fp4stream/tensor.hpp"

namespace fp4stream {

struct SpLayout {
  std::size_t ranks = 1;       // P
  std::size_t seq_len = 0;     // L, clean + noisy
  std::size_t heads = 1;       // H
  std::size_t head_dim = 1;    // d
  std::size_t num_blocks = 1;  // N_blk temporal chunks over L/2 positions
  std::size_t halo_frames = 0;

  std::size_t local_len() const { return seq_len / (2 * ranks); }
  std::size_t temporal_len() const { return seq_len / 2; }
  std::size_t tokens_per_block() const { return temporal_len() / num_blocks; }
  std::size_t blocks_per_rank() const { return num_blocks / ranks; }
};

/// Throws InvalidArgument unless L % 2P == 0, H % P == 0, N_blk % P == 0 and
/// N_blk divides L/2.
void validate(const SpLayout& layout);

struct TokenIdentity {
  std::size_t rank = 0;      // p(i)
  std::size_t offset = 0;    // r(i)
  std::size_t temporal = 0;  // t(i)
  bool is_clean = true;

  friend bool operator==(const TokenIdentity&, const TokenIdentity&) = default;
};

TokenIdentity token_identity(std::size_t index, const SpLayout& layout);

struct Chunking {
  std::size_t tokens_per_chunk = 1;
  std::size_t chunk_of(std::size_t temporal) const { return temporal / tokens_per_chunk; }
};

/// Teacher-forcing visibility on logical (temporal, clean/noisy) identities.
/// Noisy queries see strictly earlier clean chunks and noisy tokens of their
/// own chunk; clean queries see clean chunks up to and including their own.
bool teacher_forcing_mask(std::size_t q_temporal, bool q_is_clean, std::size_t k_temporal,
                          bool k_is_clean, Chunking chunking);

/// Teacher-forcing mask evaluated on interleaved indices.
bool natural_mask(std::size_t i, std::size_t j, const SpLayout& layout);

/// Position of interleaved token i in the logical [all clean; all noisy] order.
std::size_t logical_index(std::size_t i, const SpLayout& layout);

/// Seq-sharded ((L/P) x H x d per rank) to head-sharded (L x (H/P) x d per rank).
std::vector<Tensor> all_to_all_forward(std::span<const Tensor> per_rank, const SpLayout& layout);
std::vector<Tensor> all_to_all_backward(std::span<const Tensor> per_rank, const SpLayout& layout);

/// Strictly causal FIR stand-in for the video encoder:
///   y[f] = (1/R) * sum_{k=0}^{R-1} x[f-k], with x[f] = 0 for f < 0.
/// Frames are rows of an F x D tensor; latent frames map 1:1 to raw frames.
class CausalMovingAverage {
 public:
  explicit CausalMovingAverage(std::size_t receptive_field);

  std::size_t receptive_field() const { return receptive_field_; }
  Tensor encode(const Tensor& frames) const;

 private:
  std::size_t receptive_field_;
};

struct ShardedEncoding {
  std::vector<Tensor> local_latents;        // F/P x D per rank
  std::vector<std::size_t> encoded_frames;  // frames pushed through the encoder per rank
};

/// Each rank p encodes its F/P frames plus an h-frame left halo (none on rank
/// 0) and discards the halo outputs. Halo frames that would precede the
/// sequence start are the encoder's zero padding.
ShardedEncoding halo_sharded_encode(const Tensor& frames, std::size_t ranks,
                                    std::size_t halo_frames,
                                    const CausalMovingAverage& encoder);

enum class CommPrecision { Bf16, Nvfp4 };

/// Bytes moved by the pre-attention Q, K, V All-to-All for one layer.
/// NVFP4 counts packed codes plus one E4M3 scale per 16 elements of d.
std::uint64_t comm_volume(const SpLayout& layout, CommPrecision precision);

struct CommReport {
  std::uint64_t bf16_bytes = 0;
  std::uint64_t nvfp4_bytes = 0;
  double ratio = 0.0;
};

CommReport comm_report(const SpLayout& layout);

}  // namespace fp4stream
