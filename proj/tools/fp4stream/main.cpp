// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>

#include "command.hpp"
#include "fp4stream/error.hpp"
#include "fp4stream/version.hpp"

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

void write_report(const fp4cli::Command& cmd, const fp4cli::CommandOutput& out) {
  const std::string text = fp4cli::render_report(cmd.app->get_name(), out);
  if (cmd.report_path) {
    std::ofstream file(*cmd.report_path, std::ios::binary);
    if (!file) throw fp4stream::Error(fp4stream::ErrorCode::Io, "cannot open " + *cmd.report_path);
    file << text;
    if (!file) throw fp4stream::Error(fp4stream::ErrorCode::Io, "write failed for " + *cmd.report_path);
  } else if (!out.stdout_taken) {
    std::cout << text;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NVFP4 quantization, KV cache, sequence-parallel and pipeline toolkit", "fp4stream"};
  app.set_version_flag("--version", fp4stream::kVersion);
  app.require_subcommand(1);

  fp4cli::Registry registry;
  fp4cli::add_quant_commands(app, registry);
  fp4cli::add_kv_bench(app, registry);
  fp4cli::add_sp_commands(app, registry);
  fp4cli::add_pipeline_commands(app, registry);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << "\n" << app.help();
    return kExitUsage;
  }

  for (const fp4cli::Command& cmd : registry) {
    if (!cmd.app->parsed()) continue;
    try {
      const fp4cli::CommandOutput out = cmd.run();
      write_report(cmd, out);
      return out.exit_code;
    } catch (const fp4stream::Error& e) {
      std::cerr << "error [" << fp4stream::to_string(e.code()) << "]: " << e.what() << "\n";
      return kExitDomain;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitDomain;
    }
  }
  return kExitUsage;
}
