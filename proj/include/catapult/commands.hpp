#pragma once

#include "catapult/config.hpp"

#include <filesystem>
#include <string>

namespace catapult::commands {

enum ExitCode : int { kOk = 0, kConfigError = 1, kTheoryFailure = 2, kRuntimeError = 3 };

struct Outcome {
  int exit_code = kOk;
  std::filesystem::path output_dir;  // <output_dir>/<command>/<config hash>
  std::string summary;
};

// Runs one of run, sweep, scenarios, beta-sweep, verify-theory and writes its artifacts.
// Errors propagate as exceptions; the caller maps them to exit codes.
Outcome execute(const std::string& command, const config::ExperimentConfig& cfg);

bool is_command(const std::string& command);

}  // namespace catapult::commands
