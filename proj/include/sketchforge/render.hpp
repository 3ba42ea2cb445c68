#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sketchforge/field.hpp"
#include "sketchforge/image.hpp"

namespace sketchforge {

struct CameraPose {
  Eigen::Vector3d position{0.0, 0.0, 3.0};
  Eigen::Vector3d look_at = Eigen::Vector3d::Zero();
  Eigen::Vector3d up = Eigen::Vector3d::UnitY();
  double fov_y = 0.6981317007977318;  // 40 degrees
  int width = 64;
  int height = 64;
  double near = 1.2;
  double far = 4.8;

  void validate() const;
};

// Camera on a sphere around the origin, looking at it. Azimuth 0 sits on +z,
// azimuth 90 degrees on +x; elevation is measured from the x-z plane toward +y.
// Angles in radians; near/far bracket the unit-cube bounds.
CameraPose orbit_pose(double azimuth, double elevation, double radius, double fov_y, int width, int height);

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;
  double near;
  double far;
};

// One ray per pixel through the pixel center, row-major from the top-left pixel.
std::vector<Ray> make_rays(const CameraPose& pose);

struct RenderOptions {
  int n_samples = 96;
  bool stratified = true;
  uint64_t seed = 0;
  bool white_background = false;
  unsigned workers = 0;  // 0 = hardware concurrency
};

constexpr double kDepthEpsilon = 1e-10;

struct RenderOutput {
  Image rgb;                  // H x W x 3
  Image depth;                // H x W x 1
  Image final_transmittance;  // H x W x 1
  int n_samples = 0;
  std::vector<double> sample_weights;  // (H*W) x n_samples, ray-major
  std::vector<double> sample_depths;   // same layout

  Image opacity() const;  // 1 - final transmittance
};

RenderOutput render(const VoxelGrid& grid, const CameraPose& pose, const RenderOptions& options);

// Upstream gradients of a scalar objective. Empty members are treated as zero;
// `rgb` is required.
struct RenderUpstream {
  Image rgb;
  Image depth;
  Image final_transmittance;
  std::vector<double> sample_weights;
};

// Exact gradient of the quadrature estimator. Uses the same sample placement as
// render() with identical options.
FieldGradients render_backward(const VoxelGrid& grid, const CameraPose& pose, const RenderOptions& options,
                               const RenderUpstream& upstream);

// PNG export. Depth maps [near, far] linearly to [0, 255].
void write_rgb_png(const Image& rgb, const std::filesystem::path& path);
void write_depth_png(const Image& depth, double near, double far, const std::filesystem::path& path);

struct TurntableOptions {
  int frames = 8;
  double azimuth_offset = 0.0;            // radians, added to every frame
  double elevation = 0.2617993877991494;  // 15 degrees
  double radius = 3.0;
  double fov_y = 0.6981317007977318;
  int width = 128;
  int height = 128;
  RenderOptions render;
};

// Pose of frame f: azimuth offset + 2 pi f / frames, wrapped to [0, 2 pi).
CameraPose turntable_pose(const TurntableOptions& options, int frame);

// Writes frame_%04d.png and depth_%04d.png at uniform azimuths starting at the offset.
// Returns the written paths.
std::vector<std::filesystem::path> export_turntable(const VoxelGrid& grid, const TurntableOptions& options,
                                                    const std::filesystem::path& directory);

}  // namespace sketchforge
