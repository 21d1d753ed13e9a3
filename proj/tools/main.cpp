#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  auto overrides = cutoff::cli::extract_overrides(args);

  CLI::App app{"cutoff-lab: continuous-time Glauber dynamics toolkit"};
  app.require_subcommand(1);
  std::string config;
  bool quick = false;
  for (const auto& name : cutoff::cli::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "INI configuration file");
    sub->footer("Any key can be overridden with --section.key=value");
    if (name == "verify") sub->add_flag("--quick", quick, "Run the quick subset");
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (quick) overrides.push_back("--verify.quick=true");
  std::optional<std::filesystem::path> path;
  if (!config.empty()) path = config;
  return cutoff::cli::run(command, path, overrides, std::cout, std::cerr);
}
