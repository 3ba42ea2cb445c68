#include "sketchforge/field.hpp"

#include <cmath>
#include <fmt/format.h>

#include "sketchforge/errors.hpp"

namespace sketchforge {

std::string to_string(DensityActivation a) {
  switch (a) {
    case DensityActivation::softplus: return "softplus";
    case DensityActivation::relu: return "relu";
    case DensityActivation::exp: return "exp";
  }
  return "unknown";
}

DensityActivation parse_density_activation(const std::string& name) {
  if (name == "softplus") return DensityActivation::softplus;
  if (name == "relu") return DensityActivation::relu;
  if (name == "exp") return DensityActivation::exp;
  throw InputError(fmt::format("unknown density activation '{}'", name));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate_density(DensityActivation a, double z) {
  switch (a) {
    case DensityActivation::softplus: return z > 30.0 ? z : std::log1p(std::exp(z));
    case DensityActivation::relu: return z > 0.0 ? z : 0.0;
    case DensityActivation::exp: return std::exp(z);
  }
  return 0.0;
}

double activate_density_derivative(DensityActivation a, double z) {
  switch (a) {
    case DensityActivation::softplus: return sigmoid(z);
    case DensityActivation::relu: return z > 0.0 ? 1.0 : 0.0;
    case DensityActivation::exp: return std::exp(z);
  }
  return 0.0;
}

double inverse_density_activation(DensityActivation a, double sigma) {
  switch (a) {
    case DensityActivation::softplus: return std::log(std::expm1(sigma));
    case DensityActivation::relu: return sigma;
    case DensityActivation::exp: return std::log(sigma);
  }
  return 0.0;
}

VoxelGrid::VoxelGrid(std::array<int, 3> res, Bounds b, DensityActivation act, double initial_sigma)
    : resolution(res), bounds(std::move(b)), density_activation(act) {
  validate();
  density_logits.assign(vertex_count(), static_cast<float>(inverse_density_activation(act, initial_sigma)));
  color_feats.assign(3 * vertex_count(), 0.0f);
}

void VoxelGrid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (resolution[a] < 2) throw InputError(fmt::format("grid resolution must be >= 2 on every axis (axis {} is {})", a, resolution[a]));
    if (!(bounds.hi[a] > bounds.lo[a])) throw InputError("grid bounds must have positive extent on every axis");
  }
  if (!density_logits.empty() && density_logits.size() != vertex_count())
    throw InputError("density array does not match resolution");
  if (!color_feats.empty() && color_feats.size() != 3 * vertex_count())
    throw InputError("color array does not match resolution");
}

Eigen::Vector3d VoxelGrid::vertex_position(int i, int j, int k) const {
  const Eigen::Vector3d u(static_cast<double>(i) / (resolution[0] - 1), static_cast<double>(j) / (resolution[1] - 1),
                          static_cast<double>(k) / (resolution[2] - 1));
  return bounds.lo + (bounds.hi - bounds.lo).cwiseProduct(u);
}

VoxelGrid make_default_grid(int resolution) {
  return VoxelGrid({resolution, resolution, resolution}, Bounds{}, DensityActivation::softplus, 0.1);
}

bool locate(const VoxelGrid& grid, const Eigen::Vector3d& p, CellStencil& s) {
  if (!p.allFinite()) throw InputError("field query at a non-finite point");
  if (!grid.bounds.contains(p)) return false;
  std::array<int, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    const int n = grid.resolution[a];
    const double u = (p[a] - grid.bounds.lo[a]) / (grid.bounds.hi[a] - grid.bounds.lo[a]) * (n - 1);
    int i = static_cast<int>(std::floor(u));
    if (i > n - 2) i = n - 2;
    if (i < 0) i = 0;
    i0[a] = i;
    f[a] = u - i;
  }
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    s.vertex[c] = grid.index(i0[0] + dx, i0[1] + dy, i0[2] + dz);
    s.weight[c] = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
  }
  return true;
}

RawSample interpolate(const VoxelGrid& grid, const CellStencil& s) {
  RawSample r;
  for (int c = 0; c < 8; ++c) {
    const double w = s.weight[c];
    const size_t v = s.vertex[c];
    r.density_logit += w * grid.density_logits[v];
    r.color_feat[0] += w * grid.color_feats[3 * v];
    r.color_feat[1] += w * grid.color_feats[3 * v + 1];
    r.color_feat[2] += w * grid.color_feats[3 * v + 2];
  }
  return r;
}

FieldSample activate(const VoxelGrid& grid, const RawSample& raw) {
  FieldSample out;
  out.sigma = activate_density(grid.density_activation, raw.density_logit);
  for (int c = 0; c < 3; ++c) out.color[c] = sigmoid(raw.color_feat[c]);
  return out;
}

FieldSample query(const VoxelGrid& grid, const Eigen::Vector3d& p, const Eigen::Vector3d& /*d*/) {
  CellStencil s;
  if (!locate(grid, p, s)) return {};
  return activate(grid, interpolate(grid, s));
}

void accumulate_sample_gradient(const VoxelGrid& grid, const CellStencil& s, const RawSample& raw, double d_sigma,
                                const Eigen::Vector3d& d_c, FieldGradients& grads) {
  const double g_logit = d_sigma == 0.0 ? 0.0 : d_sigma * activate_density_derivative(grid.density_activation, raw.density_logit);
  Eigen::Vector3d g_feat;
  for (int c = 0; c < 3; ++c) {
    const double sg = sigmoid(raw.color_feat[c]);
    g_feat[c] = d_c[c] * sg * (1.0 - sg);
  }
  for (int c = 0; c < 8; ++c) {
    const double w = s.weight[c];
    if (w == 0.0) continue;
    const size_t v = s.vertex[c];
    grads.d_density_logits[v] += w * g_logit;
    grads.d_color_feats[3 * v] += w * g_feat[0];
    grads.d_color_feats[3 * v + 1] += w * g_feat[1];
    grads.d_color_feats[3 * v + 2] += w * g_feat[2];
  }
}

void query_backward(const VoxelGrid& grid, const Eigen::Vector3d& p, const Eigen::Vector3d& /*d*/, double d_sigma,
                    const Eigen::Vector3d& d_c, FieldGradients& grads) {
  if (!std::isfinite(d_sigma) || !d_c.allFinite()) throw InputError("query_backward: non-finite upstream gradient");
  if (!grads.matches(grid)) throw InputError("query_backward: gradient buffer does not match grid");
  CellStencil s;
  if (!locate(grid, p, s)) return;
  accumulate_sample_gradient(grid, s, interpolate(grid, s), d_sigma, d_c, grads);
}

bool FieldGradients::all_finite() const {
  for (double v : d_density_logits)
    if (!std::isfinite(v)) return false;
  for (double v : d_color_feats)
    if (!std::isfinite(v)) return false;
  return true;
}

FieldGradients& FieldGradients::operator+=(const FieldGradients& o) {
  if (o.d_density_logits.size() != d_density_logits.size() || o.d_color_feats.size() != d_color_feats.size())
    throw InputError("FieldGradients shape mismatch");
  for (size_t i = 0; i < d_density_logits.size(); ++i) d_density_logits[i] += o.d_density_logits[i];
  for (size_t i = 0; i < d_color_feats.size(); ++i) d_color_feats[i] += o.d_color_feats[i];
  return *this;
}

FieldGradients& FieldGradients::operator*=(double s) {
  for (double& v : d_density_logits) v *= s;
  for (double& v : d_color_feats) v *= s;
  return *this;
}

}  // namespace sketchforge
