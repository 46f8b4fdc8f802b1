// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <memory>

#include "command.hpp"
#include "fp4stream/pipeline.hpp"

namespace fp4cli {
namespace {

using namespace fp4stream;

const std::map<std::string, PipelineMode> kPipelineModes{{"centralized", PipelineMode::Centralized},
                                                         {"streaming", PipelineMode::StreamingAsync}};

const char* mode_name(PipelineMode m) { return m == PipelineMode::Centralized ? "centralized" : "streaming"; }

Json trace_json(const PipelineTrace& t) {
  Json schedule = Json::array();
  for (std::size_t k = 0; k < t.chunks.size(); ++k) {
    const ChunkSchedule& s = t.chunks[k];
    schedule.push_back({{"chunk", k},
                        {"denoise_start", s.denoise_start},
                        {"denoise_end", s.denoise_end},
                        {"decode_start", s.decode_start},
                        {"decode_end", s.decode_end}});
  }
  return {{"e2e", t.e2e_latency},
          {"peak_buffer_chunks", t.peak_latent_buffer_chunks},
          {"peak_buffer_bytes", t.peak_latent_buffer_bytes},
          {"schedule", schedule}};
}

struct CalibrateOptions {
  double sync = 0.0;
  double async = 0.0;
  std::size_t chunks = 0;
};

}  // namespace

void add_pipeline_commands(CLI::App& root, Registry& registry) {
  {
    auto opt = std::make_shared<PipelineConfig>();
    Command& cmd = add_command(root, registry, "pipeline-sim", "Simulate chunked denoise/decode scheduling");
    cmd.app->add_option("--chunks", opt->chunks, "Chunks C")->required();
    cmd.app->add_option("--t-dit", opt->t_dit, "Per-chunk denoise latency, s")->required();
    cmd.app->add_option("--t-vae", opt->t_vae, "Per-chunk decode latency, s")->required();
    cmd.app->add_option("--mode", opt->mode, "centralized | streaming")
        ->transform(CLI::CheckedTransformer(kPipelineModes, CLI::ignore_case));
    cmd.app->add_option("--latent-bytes", opt->chunk_latent_bytes, "Bytes per buffered latent chunk");
    cmd.run = [opt] {
      CommandOutput out;
      out.config = {{"chunks", opt->chunks},
                    {"t_dit", opt->t_dit},
                    {"t_vae", opt->t_vae},
                    {"mode", mode_name(opt->mode)},
                    {"latent_bytes", opt->chunk_latent_bytes}};
      out.results = trace_json(simulate(*opt));
      out.results["closed_form"] = closed_form_latency(*opt);
      return out;
    };
  }
  {
    auto opt = std::make_shared<CalibrateOptions>();
    Command& cmd = add_command(root, registry, "pipeline-calibrate",
                               "Fit per-chunk latencies to centralized/streaming end-to-end times");
    cmd.app->add_option("--sync", opt->sync, "Centralized end-to-end latency, s")->required();
    cmd.app->add_option("--async", opt->async, "Streaming end-to-end latency, s")->required();
    cmd.app->add_option("--chunks", opt->chunks, "Chunks C")->required();
    cmd.run = [opt] {
      const Calibration fit = calibrate(opt->sync, opt->async, opt->chunks);
      PipelineConfig cfg;
      cfg.chunks = opt->chunks;
      cfg.t_dit = fit.t_dit;
      cfg.t_vae = fit.t_vae;
      cfg.mode = PipelineMode::StreamingAsync;
      const PipelineTrace streaming = simulate(cfg);
      cfg.mode = PipelineMode::Centralized;
      const PipelineTrace centralized = simulate(cfg);

      CommandOutput out;
      out.config = {{"sync", opt->sync}, {"async", opt->async}, {"chunks", opt->chunks}};
      out.results = trace_json(streaming);
      out.results["t_dit"] = fit.t_dit;
      out.results["t_vae"] = fit.t_vae;
      out.results["e2e_centralized"] = centralized.e2e_latency;
      out.results["peak_buffer_chunks_centralized"] = centralized.peak_latent_buffer_chunks;
      return out;
    };
  }
}

}  // namespace fp4cli
