#pragma once

// Self-describing model checkpoints.
//
// Layout (all integers and floats little-endian):
//   "MMEM"                       4 bytes magic
//   u16 version                  currently 1
//   u32 n, n bytes               ModelConfig::canonical_json()
//   u32 tensor count
//   per tensor: u64 length, length × f64   in ModelParams enumeration order
//   u32 CRC-32                   over every preceding byte

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "memfuse/model.hpp"

namespace memfuse {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
};

std::vector<std::uint8_t> serialize(const ModelParams& params, const ModelConfig& config);

/// Throws TruncationError, ChecksumError, VersionError, FormatError, or
/// ConfigMismatchError when the tensors disagree with the embedded config.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);
/// As above, and additionally requires the embedded config to equal `expected`.
Checkpoint deserialize(std::span<const std::uint8_t> bytes, const ModelConfig& expected);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace memfuse
