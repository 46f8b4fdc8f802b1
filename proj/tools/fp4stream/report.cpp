// SPDX-License-Identifier: Apache-2.0

#include "command.hpp"
#include "fp4stream/version.hpp"

namespace fp4cli {

Command& add_command(CLI::App& root, Registry& registry, const std::string& name,
                     const std::string& description) {
  registry.push_back(Command{});
  Command& cmd = registry.back();
  cmd.app = root.add_subcommand(name, description);
  cmd.app->add_option("--report", cmd.report_path, "Write the JSON report here instead of stdout");
  return cmd;
}

std::string render_report(const std::string& command, const CommandOutput& output) {
  Json report;
  report["command"] = command;
  report["config"] = output.config;
  report["results"] = output.results;
  report["version"] = fp4stream::kVersion;
  return report.dump(2) + "\n";
}

}  // namespace fp4cli
