#pragma once

#include "descentlab/config.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace descentlab {

struct CommandOptions {
  std::string out_dir = ".";
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed_override;
};

/// Text for stdout plus whether the command's own check passed. Errors
/// (bad config, hypothesis violations, divergence) are thrown as Error.
struct CommandOutput {
  std::string text;
  bool ok = true;
};

/// Writes the run manifest, then the trace CSV (T + 1 rows per trial).
CommandOutput cmd_run(const std::string& config_path, const CommandOptions& opts = {});
/// Bound check for `setting`; ok iff the verdict passes (or fails when expect_fail).
CommandOutput cmd_verify(const std::string& config_path, const CommandOptions& opts = {});
/// Complexity table at `epsilon`.
CommandOutput cmd_table(const std::string& config_path, const CommandOptions& opts = {});
/// Property suite for the configured fixture (all fixtures when none is given).
CommandOutput cmd_suite(const std::string& config_path, const CommandOptions& opts = {});

std::string version();

}  // namespace descentlab
