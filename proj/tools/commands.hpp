#pragma once

#include <iosfwd>

#include "config.hpp"
#include "output.hpp"

namespace cutoff::cli {

inline constexpr int kExitAcceptanceFailure = 5;

struct CommandResult {
  OutputSet outputs;
  int exit_code = 0;
};

// Each command computes everything in memory; nothing touches the disk until
// the caller commits the result.
CommandResult cmd_oracle(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_support(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_mixing(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_gap(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_verify(const RunConfig& cfg, std::ostream& log);

// Validates, runs and commits one command. Returns the process exit code;
// errors are reported on `err` and leave no files behind.
int run(const std::string& command, const std::optional<std::filesystem::path>& config_path,
        const std::vector<std::string>& overrides, std::ostream& log, std::ostream& err);

}  // namespace cutoff::cli
