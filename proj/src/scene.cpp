#include "sketchforge/scene.hpp"

#include <algorithm>
#include <cmath>

namespace sketchforge {

namespace {

constexpr double kInsideDensity = 40.0;
constexpr double kFalloff = 0.03;
constexpr double kOutsideDensity = 1e-3;

double sphere_distance(const Eigen::Vector3d& p) { return (p - Eigen::Vector3d(0.0, 0.15, 0.0)).norm() - 0.45; }

double slab_distance(const Eigen::Vector3d& p) {
  const Eigen::Vector3d q = (p - Eigen::Vector3d(0.0, -0.45, 0.0)).cwiseAbs() - Eigen::Vector3d(0.65, 0.08, 0.45);
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

double logit(double c) { return std::log(c / (1.0 - c)); }

}  // namespace

VoxelGrid make_toy_scene(int resolution) {
  VoxelGrid g({resolution, resolution, resolution}, Bounds{}, DensityActivation::softplus, kOutsideDensity);
  for (int k = 0; k < resolution; ++k)
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        const Eigen::Vector3d p = g.vertex_position(i, j, k);
        const double ds = sphere_distance(p), db = slab_distance(p);
        const double d = std::min(ds, db);
        const double occupancy = 1.0 / (1.0 + std::exp(d / kFalloff));
        const double sigma = kOutsideDensity + kInsideDensity * occupancy;
        const size_t v = g.index(i, j, k);
        g.density_logits[v] = static_cast<float>(inverse_density_activation(g.density_activation, sigma));

        Eigen::Vector3d c;
        if (ds < db) {
          // Warm sphere with latitude bands.
          const double band = 0.5 + 0.5 * std::sin(10.0 * p.y());
          c = {0.85, 0.35 + 0.35 * band, 0.15 + 0.1 * band};
        } else {
          // Cool slab with a checkerboard.
          const bool check = (static_cast<int>(std::floor(p.x() * 5.0)) + static_cast<int>(std::floor(p.z() * 5.0))) % 2 == 0;
          c = check ? Eigen::Vector3d(0.2, 0.35, 0.75) : Eigen::Vector3d(0.75, 0.8, 0.85);
        }
        for (int ch = 0; ch < 3; ++ch) g.color_feats[3 * v + ch] = static_cast<float>(logit(std::clamp(c[ch], 0.02, 0.98)));
      }
  return g;
}

}  // namespace sketchforge
