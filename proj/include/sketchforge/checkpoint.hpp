#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sketchforge/adam.hpp"
#include "sketchforge/field.hpp"

namespace sketchforge {

// Binary layout, all little-endian:
//   "SKFG" | u32 version | u32 nx, ny, nz | f64 lo[3], hi[3]
//   | u32 density_activation | u32 color_activation | u64 iteration
//   | u32 has_optimizer [| u64 step | f64 lr_density, lr_color, beta1, beta2, epsilon]
//   | f32 density_logits[n] | f32 color_feats[3n]
//   [| f32 m_density[n] | f32 v_density[n] | f32 m_color[3n] | f32 v_color[3n]]
// Arrays are x-fastest over vertices; color arrays interleave the channels.
constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  VoxelGrid grid;
  std::optional<OptimizerState> optimizer;
  uint64_t iteration = 0;
};

std::string encode_checkpoint(const VoxelGrid& grid, const OptimizerState* optimizer, uint64_t iteration);
// Throws LoadError on bad magic, unknown version, truncation or trailing bytes.
Checkpoint decode_checkpoint(const std::string& bytes);

// Writes through a temporary file and renames, so readers never see a partial file.
void save_checkpoint(const std::filesystem::path& path, const VoxelGrid& grid, const OptimizerState* optimizer,
                     uint64_t iteration);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sketchforge
