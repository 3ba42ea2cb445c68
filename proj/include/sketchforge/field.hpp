#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace sketchforge {

enum class DensityActivation { softplus, relu, exp };
enum class ColorActivation { sigmoid };

std::string to_string(DensityActivation a);
DensityActivation parse_density_activation(const std::string& name);

struct Bounds {
  Eigen::Vector3d lo{-1.0, -1.0, -1.0};
  Eigen::Vector3d hi{1.0, 1.0, 1.0};

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

// Dense voxel radiance field. `resolution` counts vertices per axis; parameters
// live on vertices in x-fastest order. Color features are stored interleaved
// (three consecutive floats per vertex).
struct VoxelGrid {
  std::array<int, 3> resolution{2, 2, 2};
  Bounds bounds;
  DensityActivation density_activation = DensityActivation::softplus;
  ColorActivation color_activation = ColorActivation::sigmoid;
  std::vector<float> density_logits;
  std::vector<float> color_feats;

  VoxelGrid() = default;
  // Initialized to a faint fog of density `initial_sigma` and mid-gray color.
  VoxelGrid(std::array<int, 3> resolution, Bounds bounds,
            DensityActivation density_activation = DensityActivation::softplus,
            double initial_sigma = 0.1);

  size_t vertex_count() const {
    return static_cast<size_t>(resolution[0]) * resolution[1] * resolution[2];
  }
  size_t index(int i, int j, int k) const {
    return static_cast<size_t>(i) + static_cast<size_t>(resolution[0]) * (j + static_cast<size_t>(resolution[1]) * k);
  }
  Eigen::Vector3d vertex_position(int i, int j, int k) const;

  // Validates the structural invariants; throws InputError.
  void validate() const;
};

// 64^3 over [-1,1]^3 with softplus density at sigma ~ 0.1.
VoxelGrid make_default_grid(int resolution = 64);

double activate_density(DensityActivation a, double logit);
double activate_density_derivative(DensityActivation a, double logit);
double inverse_density_activation(DensityActivation a, double sigma);
double sigmoid(double x);

struct FieldSample {
  double sigma = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

// Eight trilinear corners of the cell containing a point.
struct CellStencil {
  std::array<size_t, 8> vertex{};
  std::array<double, 8> weight{};
};

// Returns false when p lies outside the grid bounds.
bool locate(const VoxelGrid& grid, const Eigen::Vector3d& p, CellStencil& stencil);

// Pre-activation values interpolated at a stencil.
struct RawSample {
  double density_logit = 0.0;
  Eigen::Vector3d color_feat = Eigen::Vector3d::Zero();
};

RawSample interpolate(const VoxelGrid& grid, const CellStencil& stencil);
FieldSample activate(const VoxelGrid& grid, const RawSample& raw);

// Direction is accepted for interface compatibility; color is Lambertian.
FieldSample query(const VoxelGrid& grid, const Eigen::Vector3d& p, const Eigen::Vector3d& d);

struct FieldGradients {
  std::vector<double> d_density_logits;
  std::vector<double> d_color_feats;

  FieldGradients() = default;
  explicit FieldGradients(const VoxelGrid& grid)
      : d_density_logits(grid.vertex_count(), 0.0), d_color_feats(3 * grid.vertex_count(), 0.0) {}

  bool matches(const VoxelGrid& grid) const {
    return d_density_logits.size() == grid.vertex_count() && d_color_feats.size() == 3 * grid.vertex_count();
  }
  bool all_finite() const;
  FieldGradients& operator+=(const FieldGradients& other);
  FieldGradients& operator*=(double s);
};

// Accumulates into `grads` the gradient of a scalar whose partials w.r.t. the
// activated (sigma, c) at p are (d_sigma, d_c). Corners with zero trilinear
// weight are left untouched.
void query_backward(const VoxelGrid& grid, const Eigen::Vector3d& p, const Eigen::Vector3d& d, double d_sigma,
                    const Eigen::Vector3d& d_c, FieldGradients& grads);

// Same as query_backward with a precomputed stencil and raw sample.
void accumulate_sample_gradient(const VoxelGrid& grid, const CellStencil& stencil, const RawSample& raw,
                                double d_sigma, const Eigen::Vector3d& d_c, FieldGradients& grads);

}  // namespace sketchforge
