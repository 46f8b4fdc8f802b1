// SPDX-License-Identifier: Apache-2.0
//
// Multi-shot attention sink bookkeeping. All units are cache chunks.

#pragma once

#include <cstddef>
#include <vector>

#include "fp4stream/kv_cache.hpp"

namespace fp4stream {

struct SinkConfig {
  std::size_t global_sink_frames = kFramesPerChunk;
  std::size_t shot_sink_frames = kFramesPerChunk;
  std::size_t window_chunks = 4;
  std::size_t frames_per_chunk = kFramesPerChunk;
};

struct SinkState {
  std::vector<ChunkIndex> global_sink_chunks;  // A_g, fixed at construction
  ChunkIndex shot_start = 0;                   // A_s = [shot_start, shot_start + shot_len)
  ChunkIndex shot_len = 1;
  ChunkIndex window = 4;   // W
  ChunkIndex current = 0;  // t, the chunk being generated

  friend bool operator==(const SinkState&, const SinkState&) = default;
};

/// Frame counts convert to chunks with ceiling division.
SinkState make_sink_state(const SinkConfig& config);

/// Sorted, deduplicated union of the global sink, the shot sink and the
/// window [t - W, t), restricted to chunks that already exist (< t).
std::vector<ChunkIndex> sink_effective_set(const SinkState& state);

/// Re-binds the shot sink to chunk k. The global sink and the cache are left
/// alone.
SinkState on_prompt_switch(SinkState state, ChunkIndex k);

SinkState advance(SinkState state);

}  // namespace fp4stream
