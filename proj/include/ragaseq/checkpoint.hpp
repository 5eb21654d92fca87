#pragma once

#include <filesystem>
#include <string>

#include "ragaseq/nnet.hpp"

namespace ragaseq {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

// File layout, all integers little-endian:
//   "RGSQCKPT" | u32 version | u32 header bytes | JSON ModelConfig
//   u32 tensor count | per tensor: u16 name bytes, name, u32 rows, u32 cols, f32 data (column-major)
//   u32 CRC-32 of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params);

/// Reads and verifies magic, version, checksum and tensor shapes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, but also rejects a checkpoint whose config differs from `expected`.
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace ragaseq
