#pragma once

#include <cstdint>
#include <vector>

#include "sketchforge/field.hpp"

namespace sketchforge {

struct AdamParams {
  double lr_density = 5e-2;
  double lr_color = 2e-2;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

// Moments are float32 like the parameters so checkpoints restore bit-exactly.
struct OptimizerState {
  AdamParams params;
  uint64_t step = 0;
  std::vector<float> m_density, v_density;
  std::vector<float> m_color, v_color;

  OptimizerState() = default;
  OptimizerState(const VoxelGrid& grid, AdamParams params);

  bool matches(const VoxelGrid& grid) const;
};

void adam_step(VoxelGrid& grid, const FieldGradients& grads, OptimizerState& state);

}  // namespace sketchforge
