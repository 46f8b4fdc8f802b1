// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <list>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace fp4cli {

using Json = nlohmann::json;

struct CommandOutput {
  Json config = Json::object();
  Json results = Json::object();
  int exit_code = 0;
  bool stdout_taken = false;  // the command already wrote its payload to stdout
};

struct Command {
  CLI::App* app = nullptr;
  std::function<CommandOutput()> run;
  std::optional<std::string> report_path;
};

// A list so option storage keeps its address as commands are added.
using Registry = std::list<Command>;

/// Adds a subcommand together with its --report option.
Command& add_command(CLI::App& root, Registry& registry, const std::string& name,
                     const std::string& description);

void add_quant_commands(CLI::App& root, Registry& registry);
void add_kv_bench(CLI::App& root, Registry& registry);
void add_sp_commands(CLI::App& root, Registry& registry);
void add_pipeline_commands(CLI::App& root, Registry& registry);

/// {command, config, results, version}, keys sorted.
std::string render_report(const std::string& command, const CommandOutput& output);

}  // namespace fp4cli
