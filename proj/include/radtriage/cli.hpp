#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "radtriage/model.hpp"

namespace radtriage {

/// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Runs one command. `args` excludes the program name, e.g. {"train", "--config", "run.json"}.
/// Results go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Human-readable parameter table: every tensor with its shape, the token
/// count for the configured input size, and per-block totals.
std::string shape_audit(const ModelConfig& cfg);

}  // namespace radtriage
