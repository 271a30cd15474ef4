#pragma once

// Binary checkpoint:
//   "CRAFTCKP" | u32 version | u64 len + config text | i32 L, P, D |
//   f64 value_scale | u32 tensor count |
//   per tensor: u64 len + name | u64 rows | u64 cols | rows*cols f64
// All integers and doubles little-endian.

#include <cstdint>
#include <filesystem>
#include <string>

#include "craft/model.hpp"

namespace craft {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  CraftParams params;
};

std::string encode_checkpoint(const TrainConfig& config, CraftParams& params);
/// Throws ParseError on bad magic, truncation or a tensor the model does not
/// have, and DataError on a version mismatch.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config, CraftParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace craft
