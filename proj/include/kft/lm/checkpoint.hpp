#pragma once

#include <filesystem>
#include <string>

#include "kft/lm/model.hpp"

namespace kft::lm {

struct Checkpoint {
  ModelState model;
  std::string stage_tag;
};

// One UTF-8 JSON header line (config, stage tag, parameter manifest,
// payload checksum) followed by raw little-endian float32 arrays in manifest
// order. Adapter factors, when attached, are stored as separate entries.
void save_checkpoint(const ModelState& model, const std::string& stage_tag,
                     const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kft::lm
