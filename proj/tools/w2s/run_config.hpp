#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "w2s/models.hpp"

namespace w2s::cli {

// Training settings read from --config. Keys mirror TrainConfig; a nested
// "weak" object applies to the weak model where a subcommand trains both.
struct RunConfig {
  TrainConfig train;
  std::optional<TrainConfig> weak;
};

/// Applies the JSON object in `path` on top of `base` (and `weak_base` for the
/// nested "weak" object). Unknown keys are a ConfigError.
RunConfig load_run_config(const std::filesystem::path& path, const TrainConfig& base,
                          const TrainConfig& weak_base);

LrDecay parse_decay(const std::string& text);
KlDirection parse_kl_direction(const std::string& text);

}  // namespace w2s::cli
