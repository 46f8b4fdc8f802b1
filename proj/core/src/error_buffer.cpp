// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/error_buffer.hpp"

#include <string>

#include "fp4stream/error.hpp"

namespace fp4stream {

ErrorBuffer::ErrorBuffer(std::size_t rank, std::size_t ranks, std::size_t num_blocks,
                         std::size_t capacity)
    : rank_(rank), global_offset_(0), capacity_(capacity) {
  if (ranks == 0 || rank >= ranks) {
    throw Error(ErrorCode::InvalidArgument, "rank outside the SP group");
  }
  if (num_blocks == 0 || num_blocks % ranks != 0) {
    throw Error(ErrorCode::InvalidArgument, "N_blk=" + std::to_string(num_blocks) +
                                                " is not divisible by P=" + std::to_string(ranks));
  }
  if (capacity == 0) {
    throw Error(ErrorCode::InvalidArgument, "bucket capacity must be positive");
  }
  const std::size_t local = num_blocks / ranks;
  global_offset_ = rank * local;
  buckets_.resize(local);
}

bool ErrorBuffer::owns(std::size_t global_block) const {
  return global_block >= global_offset_ && global_block < global_offset_ + buckets_.size();
}

void ErrorBuffer::insert(std::size_t global_block, int timestep, std::vector<double> error) {
  if (!owns(global_block)) {
    throw Error(ErrorCode::ForeignPosition,
                "block " + std::to_string(global_block) + " is not owned by rank " +
                    std::to_string(rank_) + " (owns " + std::to_string(global_offset_) + ".." +
                    std::to_string(global_offset_ + buckets_.size() - 1) + ")");
  }
  auto& ring = buckets_[global_block - global_offset_][timestep];
  if (ring.size() == capacity_) ring.pop_front();
  ring.push_back(ErrorEntry{global_block, timestep, std::move(error)});
}

const std::map<int, std::deque<ErrorEntry>>& ErrorBuffer::position(std::size_t local_position) const {
  if (local_position >= buckets_.size()) {
    throw Error(ErrorCode::OutOfRange, "local position " + std::to_string(local_position) +
                                           " outside [0, " + std::to_string(buckets_.size()) + ")");
  }
  return buckets_[local_position];
}

std::optional<ErrorEntry> ErrorBuffer::sample_context(std::size_t local_position,
                                                      std::mt19937_64& rng) const {
  const auto& by_timestep = position(local_position);
  std::vector<const std::deque<ErrorEntry>*> filled;
  for (const auto& [timestep, ring] : by_timestep) {
    if (!ring.empty()) filled.push_back(&ring);
  }
  if (filled.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick_t(0, filled.size() - 1);
  const auto& ring = *filled[pick_t(rng)];
  std::uniform_int_distribution<std::size_t> pick_e(0, ring.size() - 1);
  return ring[pick_e(rng)];
}

std::optional<ErrorEntry> ErrorBuffer::sample_matched(std::size_t local_position, int timestep,
                                                      std::mt19937_64& rng) const {
  const auto& by_timestep = position(local_position);
  const auto it = by_timestep.find(timestep);
  if (it == by_timestep.end() || it->second.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
  return it->second[pick(rng)];
}

std::size_t ErrorBuffer::bucket_size(std::size_t local_position, int timestep) const {
  const auto& by_timestep = position(local_position);
  const auto it = by_timestep.find(timestep);
  return it == by_timestep.end() ? 0 : it->second.size();
}

bool inject_context_error(const ErrorBuffer& buffer, std::size_t local_position,
                          std::span<double> latent, double probability, std::mt19937_64& rng) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "injection probability must lie in [0, 1]");
  }
  std::bernoulli_distribution coin(probability);
  if (!coin(rng)) return false;
  const auto entry = buffer.sample_context(local_position, rng);
  if (!entry) return false;
  if (entry->error.size() != latent.size()) {
    throw Error(ErrorCode::ShapeMismatch, "buffered error does not match latent size");
  }
  for (std::size_t i = 0; i < latent.size(); ++i) latent[i] += entry->error[i];
  return true;
}

}  // namespace fp4stream
