// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace fp4stream {

struct ErrorEntry {
  std::size_t global_block = 0;
  int timestep = 0;
  std::vector<double> error;

  friend bool operator==(const ErrorEntry&, const ErrorEntry&) = default;
};

/// Error-recycling buffer for one SP rank. Buckets are indexed by local block
/// position (N_blk / P of them, offset by rank * N_blk / P) and by diffusion
/// timestep; each bucket is a ring of fixed capacity.
class ErrorBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 16;

  ErrorBuffer(std::size_t rank, std::size_t ranks, std::size_t num_blocks,
              std::size_t capacity = kDefaultCapacity);

  std::size_t rank() const { return rank_; }
  std::size_t local_positions() const { return buckets_.size(); }
  std::size_t global_offset() const { return global_offset_; }
  std::size_t capacity() const { return capacity_; }

  bool owns(std::size_t global_block) const;

  /// Throws ForeignPosition for blocks owned by another rank.
  void insert(std::size_t global_block, int timestep, std::vector<double> error);

  /// Uniform over the non-empty timesteps at the position, then uniform within
  /// the bucket. nullopt when the position holds nothing.
  std::optional<ErrorEntry> sample_context(std::size_t local_position, std::mt19937_64& rng) const;

  /// Uniform within the exact (position, timestep) bucket.
  std::optional<ErrorEntry> sample_matched(std::size_t local_position, int timestep,
                                           std::mt19937_64& rng) const;

  std::size_t bucket_size(std::size_t local_position, int timestep) const;

 private:
  const std::map<int, std::deque<ErrorEntry>>& position(std::size_t local_position) const;

  std::size_t rank_;
  std::size_t global_offset_;
  std::size_t capacity_;
  std::vector<std::map<int, std::deque<ErrorEntry>>> buckets_;
};

/// With probability `probability`, adds a context error sampled at the
/// position to `latent` in place. Returns whether an error was injected.
bool inject_context_error(const ErrorBuffer& buffer, std::size_t local_position,
                          std::span<double> latent, double probability, std::mt19937_64& rng);

}  // namespace fp4stream
