// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/sink.hpp"

#include <algorithm>
#include <string>

#include "fp4stream/error.hpp"

namespace fp4stream {

namespace {

ChunkIndex frames_to_chunks(std::size_t frames, std::size_t frames_per_chunk) {
  return static_cast<ChunkIndex>((frames + frames_per_chunk - 1) / frames_per_chunk);
}

}  // namespace

SinkState make_sink_state(const SinkConfig& config) {
  if (config.frames_per_chunk == 0) {
    throw Error(ErrorCode::InvalidArgument, "frames_per_chunk must be positive");
  }
  SinkState state;
  const ChunkIndex global = frames_to_chunks(config.global_sink_frames, config.frames_per_chunk);
  for (ChunkIndex c = 0; c < global; ++c) state.global_sink_chunks.push_back(c);
  state.shot_start = 0;
  state.shot_len = frames_to_chunks(config.shot_sink_frames, config.frames_per_chunk);
  state.window = static_cast<ChunkIndex>(config.window_chunks);
  state.current = 0;
  return state;
}

std::vector<ChunkIndex> sink_effective_set(const SinkState& state) {
  const ChunkIndex t = state.current;
  std::vector<ChunkIndex> out;
  for (ChunkIndex c : state.global_sink_chunks) {
    if (c >= 0 && c < t) out.push_back(c);
  }
  const ChunkIndex shot_end = std::min(state.shot_start + state.shot_len, t);
  for (ChunkIndex c = std::max<ChunkIndex>(state.shot_start, 0); c < shot_end; ++c) out.push_back(c);
  for (ChunkIndex c = std::max<ChunkIndex>(t - state.window, 0); c < t; ++c) out.push_back(c);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SinkState on_prompt_switch(SinkState state, ChunkIndex k) {
  if (k < state.shot_start) {
    throw Error(ErrorCode::InvalidArgument, "prompt switch at chunk " + std::to_string(k) +
                                                " precedes the current shot start " +
                                                std::to_string(state.shot_start));
  }
  state.shot_start = k;
  return state;
}

SinkState advance(SinkState state) {
  ++state.current;
  return state;
}

}  // namespace fp4stream
