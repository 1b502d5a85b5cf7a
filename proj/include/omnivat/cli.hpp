#pragma once

#include "omnivat/data.hpp"
#include "omnivat/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace omnivat {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitMissingInput = 3,
  kExitIncompatible = 4,
  kExitInvariant = 5,
};

/// Everything a command can be configured with.
struct RunConfig {
  TrainConfig train;
  SynthConfig synth;
};

/// Applies one key=value; "seed" sets both the data and the training seed.
/// Returns false for unknown keys, throws ConfigError on bad values.
bool apply_run_key(RunConfig& config, const std::string& key, const std::string& value);

/// key=value lines; blank lines and '#' comments are skipped. Unknown keys
/// throw ConfigError, an unreadable file IoError.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Effective configuration as key=value lines, one per field.
std::string run_config_text(const RunConfig& config);

/// Entry point of the omnivat tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace omnivat
