#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "relkit/predictor/model.hpp"

namespace relkit::predictor {

// Layout, all little-endian:
//   "RKPT", u32 version,
//   u64 x 7: F, D, C, H, H2, num_listeners, seed,
//   u32 tensor count, then per tensor in ModelParams::tensors() order:
//   u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64 row-major.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& cfg, const ModelParams& params);
// Throws DataError on a malformed or mismatching file.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace relkit::predictor
