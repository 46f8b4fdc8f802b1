// SPDX-License-Identifier: Apache-2.0
//
// Discrete-event model of chunked denoise -> decode generation.
//
// Centralized: every chunk is denoised, then every chunk is decoded.
// Streaming async: one decoder runs alongside the denoiser and takes chunks
// FIFO as soon as they are denoised and it is free. The denoiser holds back
// when ceil(t_vae / t_dit) + 1 latents are waiting for or in decode.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fp4stream {

enum class PipelineMode { Centralized, StreamingAsync };

struct PipelineConfig {
  std::size_t chunks = 1;  // C
  double t_dit = 1.0;      // per-chunk denoise latency, s
  double t_vae = 1.0;      // per-chunk decode latency, s
  PipelineMode mode = PipelineMode::StreamingAsync;
  std::uint64_t chunk_latent_bytes = 1;
};

/// Throws InvalidArgument for C == 0, negative or non-finite latencies, or
/// t_dit == 0.
void validate(const PipelineConfig& config);

struct ChunkSchedule {
  double denoise_start = 0.0;
  double denoise_end = 0.0;
  double decode_start = 0.0;
  double decode_end = 0.0;
};

struct PipelineTrace {
  std::vector<ChunkSchedule> chunks;
  double e2e_latency = 0.0;
  std::size_t peak_latent_buffer_chunks = 0;
  std::uint64_t peak_latent_buffer_bytes = 0;
};

/// Latents waiting for or undergoing decode may not exceed this in streaming mode.
std::size_t streaming_buffer_capacity(const PipelineConfig& config);

PipelineTrace simulate(const PipelineConfig& config);

/// C * (t_dit + t_vae) centralized, C * max + min streaming.
double closed_form_latency(const PipelineConfig& config);

struct Calibration {
  double t_dit = 0.0;
  double t_vae = 0.0;
};

/// Fits per-chunk latencies to a measured centralized/streaming pair. The
/// streaming model is symmetric in (t_dit, t_vae); the fit returns the
/// denoise-bound assignment t_dit >= t_vae.
Calibration calibrate(double e2e_sync, double e2e_async, std::size_t chunks);

}  // namespace fp4stream
