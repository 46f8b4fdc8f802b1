// SPDX-License-Identifier: Apache-2.0

#include "fp4stream/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <string>

#include "fp4stream/error.hpp"

namespace fp4stream {

namespace {

enum class EventKind : int {
  DecodeDone = 0,  // frees buffer space first when timestamps tie
  DenoiseDone = 1,
};

struct Event {
  double time;
  EventKind kind;
  std::size_t chunk;

  bool operator>(const Event& other) const {
    if (time != other.time) return time > other.time;
    if (kind != other.kind) return kind > other.kind;
    return chunk > other.chunk;
  }
};

}  // namespace

void validate(const PipelineConfig& config) {
  if (config.chunks == 0) throw Error(ErrorCode::InvalidArgument, "chunk count must be at least 1");
  if (!std::isfinite(config.t_dit) || config.t_dit <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "t_dit must be positive and finite");
  }
  if (!std::isfinite(config.t_vae) || config.t_vae < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "t_vae must be non-negative and finite");
  }
}

std::size_t streaming_buffer_capacity(const PipelineConfig& config) {
  validate(config);
  return static_cast<std::size_t>(std::ceil(config.t_vae / config.t_dit)) + 1;
}

PipelineTrace simulate(const PipelineConfig& config) {
  validate(config);
  const std::size_t C = config.chunks;
  const bool streaming = config.mode == PipelineMode::StreamingAsync;
  const std::size_t capacity = streaming ? streaming_buffer_capacity(config) : C;

  PipelineTrace trace;
  trace.chunks.resize(C);

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::deque<std::size_t> ready;
  std::size_t next_denoise = 0;
  std::size_t denoised = 0;
  std::size_t resident = 0;
  bool denoiser_busy = false;
  bool decoder_busy = false;

  auto dispatch = [&](double now) {
    const bool decode_allowed = streaming || denoised == C;
    if (!decoder_busy && decode_allowed && !ready.empty()) {
      const std::size_t c = ready.front();
      ready.pop_front();
      decoder_busy = true;
      trace.chunks[c].decode_start = now;
      trace.chunks[c].decode_end = now + config.t_vae;
      events.push({trace.chunks[c].decode_end, EventKind::DecodeDone, c});
    }
    if (!denoiser_busy && next_denoise < C && resident + 1 <= capacity) {
      const std::size_t c = next_denoise++;
      denoiser_busy = true;
      trace.chunks[c].denoise_start = now;
      trace.chunks[c].denoise_end = now + config.t_dit;
      events.push({trace.chunks[c].denoise_end, EventKind::DenoiseDone, c});
    }
  };

  dispatch(0.0);
  while (!events.empty()) {
    const Event ev = events.top();
    events.pop();
    if (ev.kind == EventKind::DenoiseDone) {
      denoiser_busy = false;
      ++denoised;
      ++resident;
      ready.push_back(ev.chunk);
      trace.peak_latent_buffer_chunks = std::max(trace.peak_latent_buffer_chunks, resident);
    } else {
      decoder_busy = false;
      --resident;
      trace.e2e_latency = std::max(trace.e2e_latency, ev.time);
    }
    dispatch(ev.time);
  }
  trace.peak_latent_buffer_bytes = trace.peak_latent_buffer_chunks * config.chunk_latent_bytes;
  return trace;
}

double closed_form_latency(const PipelineConfig& config) {
  validate(config);
  const auto C = static_cast<double>(config.chunks);
  if (config.mode == PipelineMode::Centralized) return C * (config.t_dit + config.t_vae);
  return C * std::max(config.t_dit, config.t_vae) + std::min(config.t_dit, config.t_vae);
}

Calibration calibrate(double e2e_sync, double e2e_async, std::size_t chunks) {
  if (chunks < 2) {
    throw Error(ErrorCode::InvalidArgument, "calibration needs at least 2 chunks");
  }
  if (!(std::isfinite(e2e_sync) && std::isfinite(e2e_async) && e2e_async > 0.0 &&
        e2e_sync > e2e_async)) {
    throw Error(ErrorCode::InconsistentMeasurements,
                "need e2e_sync > e2e_async > 0");
  }
  const auto C = static_cast<double>(chunks);
  const double per_chunk = e2e_sync / C;  // t_dit + t_vae
  const double slow = (e2e_async - per_chunk) / (C - 1.0);
  const double fast = per_chunk - slow;
  if (!(fast > 0.0) || slow < fast) {
    throw Error(ErrorCode::InconsistentMeasurements,
                "no positive (t_dit, t_vae) reproduces sync=" +
                    std::to_string(e2e_sync) + " async=" + std::to_string(e2e_async) +
                    " with C=" + std::to_string(chunks));
  }
  return {slow, fast};
}

}  // namespace fp4stream
