#pragma once

#include <filesystem>
#include <string>

#include "gazegan/cyclegan.hpp"

namespace gazegan::engine {

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes `dir/manifest.json` plus one little-endian float32 blob per layer
/// (weight then bias) and one Adam-moment blob per network. The directory is
/// assembled under a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, const ModelBundle& bundle);

/// Throws MissingModelFile when there is no manifest and CorruptCheckpoint
/// when blobs disagree with it.
ModelBundle load_checkpoint(const std::filesystem::path& dir);

std::string training_config_to_json(const TrainingConfig& config);
/// Missing keys keep their defaults; unknown keys raise InvalidConfig.
TrainingConfig training_config_from_json(const std::string& text);

}  // namespace gazegan::engine
