#pragma once

#include <span>
#include <vector>

#include "sketchforge/image.hpp"

namespace sketchforge {

struct EmptinessResult {
  double loss = 0.0;
  std::vector<double> d_weights;
};

// mean_i log(1 + beta * w_i) over all ray samples.
EmptinessResult emptiness_loss(std::span<const double> weights, double beta = 10.0);

struct CenterDepthResult {
  double loss = 0.0;
  Image d_depth;
  Image d_final_transmittance;
};

struct CenterDepthParams {
  double margin = 0.1;
  double center_fraction = 0.5;  // side of the central crop relative to the image
};

// Opacity-weighted mean depths of the central crop (c) and the remaining
// border (b), with per-region mean opacities o_c, o_b:
//   loss = o_c * o_b * max(0, depth_c - depth_b + margin).
// Zero when the center is nearer than the border by at least the margin, and
// zero for an empty scene.
CenterDepthResult center_depth_loss(const Image& depth, const Image& final_transmittance,
                                    const CenterDepthParams& params = {});

}  // namespace sketchforge
