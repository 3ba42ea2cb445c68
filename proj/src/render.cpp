#include "sketchforge/render.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "sketchforge/counter_rng.hpp"
#include "sketchforge/errors.hpp"
#include "sketchforge/parallel.hpp"
#include "sketchforge/png_io.hpp"

namespace sketchforge {

namespace {

constexpr double kHalfDiagonal = 1.7320508075688772;

struct CameraFrame {
  Eigen::Vector3d forward;
  Eigen::Vector3d right;
  Eigen::Vector3d up;
};

CameraFrame camera_frame(const CameraPose& pose) {
  const Eigen::Vector3d f = (pose.look_at - pose.position).normalized();
  const Eigen::Vector3d side = f.cross(pose.up);
  if (side.norm() < 1e-9 * std::max(1.0, pose.up.norm())) throw InputError("camera up vector is parallel to the view direction");
  const Eigen::Vector3d r = side.normalized();
  return {f, r, r.cross(f)};
}

// Sample depths and quadrature segment lengths along one ray. Segment
// boundaries are the midpoints between consecutive samples, clamped to
// [near, far], so the segments tile the ray interval exactly.
void place_samples(const Ray& ray, const RenderOptions& opt, uint64_t ray_index, double* t, double* delta) {
  const int n = opt.n_samples;
  const double span = ray.far - ray.near;
  const double bin = span / n;
  for (int i = 0; i < n; ++i) {
    const double u = opt.stratified ? hashed_uniform(opt.seed, ray_index, static_cast<uint64_t>(i)) : 0.5;
    t[i] = ray.near + (i + u) * bin;
  }
  double prev = ray.near;
  for (int i = 0; i < n; ++i) {
    const double next = i + 1 < n ? 0.5 * (t[i] + t[i + 1]) : ray.far;
    delta[i] = next - prev;
    prev = next;
  }
}

struct RaySamples {
  std::vector<double> t, delta, sigma, trans;  // trans has n+1 entries
  std::vector<Eigen::Vector3d> color;
  std::vector<RawSample> raw;
  std::vector<char> inside;

  explicit RaySamples(int n)
      : t(n), delta(n), sigma(n), trans(n + 1), color(n), raw(n), inside(n) {}
};

void march(const VoxelGrid& grid, const Ray& ray, const RenderOptions& opt, uint64_t ray_index, RaySamples& s) {
  const int n = opt.n_samples;
  place_samples(ray, opt, ray_index, s.t.data(), s.delta.data());
  s.trans[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    CellStencil st;
    const Eigen::Vector3d p = ray.origin + s.t[i] * ray.direction;
    s.inside[i] = locate(grid, p, st);
    if (s.inside[i]) {
      s.raw[i] = interpolate(grid, st);
      const FieldSample fs = activate(grid, s.raw[i]);
      s.sigma[i] = fs.sigma;
      s.color[i] = fs.color;
    } else {
      s.raw[i] = RawSample{};
      s.sigma[i] = 0.0;
      s.color[i].setZero();
    }
    s.trans[i + 1] = s.trans[i] * std::exp(-s.sigma[i] * s.delta[i]);
  }
}

Eigen::Vector3d background(const RenderOptions& opt) {
  return opt.white_background ? Eigen::Vector3d::Ones() : Eigen::Vector3d::Zero();
}

void validate_options(const RenderOptions& opt) {
  if (opt.n_samples < 2) throw InputError("render needs at least 2 samples per ray");
}

}  // namespace

void CameraPose::validate() const {
  if (!position.allFinite() || !look_at.allFinite() || !up.allFinite()) throw InputError("camera pose is not finite");
  if (!(near > 0.0 && near < far)) throw InputError(fmt::format("camera needs 0 < near < far (got {}, {})", near, far));
  if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) throw InputError("camera fov_y must lie in (0, pi)");
  if (width < 1 || height < 1) throw InputError("camera image must be at least 1x1");
  if ((look_at - position).norm() == 0.0) throw InputError("camera looks at its own position");
  camera_frame(*this);
}

CameraPose orbit_pose(double azimuth, double elevation, double radius, double fov_y, int width, int height) {
  CameraPose pose;
  pose.position = radius * Eigen::Vector3d(std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
                                           std::cos(elevation) * std::cos(azimuth));
  pose.look_at = Eigen::Vector3d::Zero();
  pose.up = Eigen::Vector3d::UnitY();
  pose.fov_y = fov_y;
  pose.width = width;
  pose.height = height;
  pose.near = std::max(radius - kHalfDiagonal, 0.05);
  pose.far = radius + kHalfDiagonal;
  return pose;
}

std::vector<Ray> make_rays(const CameraPose& pose) {
  pose.validate();
  const CameraFrame frame = camera_frame(pose);
  const double tan_half = std::tan(0.5 * pose.fov_y);
  const double aspect = static_cast<double>(pose.width) / pose.height;
  std::vector<Ray> rays;
  rays.reserve(static_cast<size_t>(pose.width) * pose.height);
  for (int py = 0; py < pose.height; ++py) {
    const double ny = (1.0 - 2.0 * (py + 0.5) / pose.height) * tan_half;
    for (int px = 0; px < pose.width; ++px) {
      const double nx = (2.0 * (px + 0.5) / pose.width - 1.0) * tan_half * aspect;
      const Eigen::Vector3d d = (frame.forward + nx * frame.right + ny * frame.up).normalized();
      rays.push_back({pose.position, d, pose.near, pose.far});
    }
  }
  return rays;
}

Image RenderOutput::opacity() const {
  Image o = final_transmittance;
  for (double& v : o.data) v = 1.0 - v;
  return o;
}

RenderOutput render(const VoxelGrid& grid, const CameraPose& pose, const RenderOptions& opt) {
  validate_options(opt);
  const std::vector<Ray> rays = make_rays(pose);
  const int n = opt.n_samples;
  const Eigen::Vector3d bg = background(opt);
  RenderOutput out;
  out.rgb = Image(pose.height, pose.width, 3);
  out.depth = Image(pose.height, pose.width, 1);
  out.final_transmittance = Image(pose.height, pose.width, 1);
  out.n_samples = n;
  out.sample_weights.assign(rays.size() * n, 0.0);
  out.sample_depths.assign(rays.size() * n, 0.0);

  parallel_for(
      rays.size(),
      [&](size_t begin, size_t end) {
        RaySamples s(n);
        for (size_t r = begin; r < end; ++r) {
          march(grid, rays[r], opt, r, s);
          Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
          double opacity = 0.0, depth_num = 0.0;
          double* w_out = out.sample_weights.data() + r * n;
          double* t_out = out.sample_depths.data() + r * n;
          for (int i = 0; i < n; ++i) {
            const double alpha = -std::expm1(-s.sigma[i] * s.delta[i]);
            const double w = s.trans[i] * alpha;
            w_out[i] = w;
            t_out[i] = s.t[i];
            rgb += w * s.color[i];
            opacity += w;
            depth_num += w * s.t[i];
          }
          rgb += s.trans[n] * bg;
          for (int c = 0; c < 3; ++c) out.rgb.data[3 * r + c] = rgb[c];
          out.depth.data[r] = depth_num / std::max(opacity, kDepthEpsilon);
          out.final_transmittance.data[r] = s.trans[n];
        }
      },
      opt.workers);
  return out;
}

FieldGradients render_backward(const VoxelGrid& grid, const CameraPose& pose, const RenderOptions& opt,
                               const RenderUpstream& up) {
  validate_options(opt);
  const std::vector<Ray> rays = make_rays(pose);
  const int n = opt.n_samples;
  const size_t n_rays = rays.size();
  if (up.rgb.height != pose.height || up.rgb.width != pose.width || up.rgb.channels != 3)
    throw InputError("render_backward: rgb upstream shape does not match the camera");
  const bool has_depth = up.depth.size() > 0;
  const bool has_trans = up.final_transmittance.size() > 0;
  const bool has_weights = !up.sample_weights.empty();
  if (has_depth && (up.depth.height != pose.height || up.depth.width != pose.width || up.depth.channels != 1))
    throw InputError("render_backward: depth upstream shape mismatch");
  if (has_trans && (up.final_transmittance.height != pose.height || up.final_transmittance.width != pose.width ||
                    up.final_transmittance.channels != 1))
    throw InputError("render_backward: transmittance upstream shape mismatch");
  if (has_weights && up.sample_weights.size() != n_rays * n)
    throw InputError("render_backward: sample-weight upstream shape mismatch");
  const Eigen::Vector3d bg = background(opt);

  // Phase 1 (parallel): per-sample gradients w.r.t. pre-activation values.
  // Phase 2 (serial, fixed ray order): scatter into the grid, so the result is
  // independent of the worker count.
  struct SampleGrad {
    double d_logit;
    double d_feat[3];
  };
  std::vector<SampleGrad> sample_grads(n_rays * n);
  std::vector<char> active(n_rays * n, 0);

  parallel_for(
      n_rays,
      [&](size_t begin, size_t end) {
        RaySamples s(n);
        std::vector<double> w(n), g(n);
        for (size_t r = begin; r < end; ++r) {
          march(grid, rays[r], opt, r, s);
          const Eigen::Vector3d g_rgb(up.rgb.data[3 * r], up.rgb.data[3 * r + 1], up.rgb.data[3 * r + 2]);
          double opacity = 0.0, depth_num = 0.0;
          for (int i = 0; i < n; ++i) {
            w[i] = s.trans[i] * -std::expm1(-s.sigma[i] * s.delta[i]);
            opacity += w[i];
            depth_num += w[i] * s.t[i];
          }
          const double g_depth = has_depth ? up.depth.data[r] : 0.0;
          const double g_trans = (has_trans ? up.final_transmittance.data[r] : 0.0) + g_rgb.dot(bg);
          const double depth = depth_num / std::max(opacity, kDepthEpsilon);
          for (int i = 0; i < n; ++i) {
            double gi = g_rgb.dot(s.color[i]);
            if (has_weights) gi += up.sample_weights[r * n + i];
            if (g_depth != 0.0)
              gi += opacity > kDepthEpsilon ? g_depth * (s.t[i] - depth) / opacity : g_depth * s.t[i] / kDepthEpsilon;
            g[i] = gi;
          }
          // d/ds_k with s_k = sigma_k delta_k:
          //   G_k T_{k+1} - sum_{i>k} G_i w_i - g_trans T_N
          double tail = 0.0;
          for (int k = n - 1; k >= 0; --k) {
            const size_t idx = r * n + k;
            if (s.inside[k]) {
              const double d_s = g[k] * s.trans[k + 1] - tail - g_trans * s.trans[n];
              const double d_sigma = d_s * s.delta[k];
              const Eigen::Vector3d d_c = w[k] * g_rgb;
              SampleGrad& sg = sample_grads[idx];
              sg.d_logit = d_sigma == 0.0 ? 0.0 : d_sigma * activate_density_derivative(grid.density_activation, s.raw[k].density_logit);
              for (int c = 0; c < 3; ++c) {
                const double sig = sigmoid(s.raw[k].color_feat[c]);
                sg.d_feat[c] = d_c[c] * sig * (1.0 - sig);
              }
              active[idx] = 1;
            }
            tail += g[k] * w[k];
          }
        }
      },
      opt.workers);

  FieldGradients grads(grid);
  std::vector<double> t(n), delta(n);
  for (size_t r = 0; r < n_rays; ++r) {
    place_samples(rays[r], opt, r, t.data(), delta.data());
    for (int k = 0; k < n; ++k) {
      const size_t idx = r * n + k;
      if (!active[idx]) continue;
      CellStencil st;
      locate(grid, rays[r].origin + t[k] * rays[r].direction, st);
      const SampleGrad& sg = sample_grads[idx];
      for (int c = 0; c < 8; ++c) {
        const double wc = st.weight[c];
        if (wc == 0.0) continue;
        const size_t v = st.vertex[c];
        grads.d_density_logits[v] += wc * sg.d_logit;
        grads.d_color_feats[3 * v] += wc * sg.d_feat[0];
        grads.d_color_feats[3 * v + 1] += wc * sg.d_feat[1];
        grads.d_color_feats[3 * v + 2] += wc * sg.d_feat[2];
      }
    }
  }
  return grads;
}

void write_rgb_png(const Image& rgb, const std::filesystem::path& path) { write_png(rgb, path); }

void write_depth_png(const Image& depth, double near, double far, const std::filesystem::path& path) {
  Image mapped(depth.height, depth.width, 1);
  for (size_t i = 0; i < depth.size(); ++i) mapped.data[i] = std::clamp((depth.data[i] - near) / (far - near), 0.0, 1.0);
  write_png(mapped, path);
}

CameraPose turntable_pose(const TurntableOptions& opt, int frame) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double az = std::fmod(opt.azimuth_offset + two_pi * frame / opt.frames, two_pi);
  if (az < 0.0) az += two_pi;
  return orbit_pose(az, opt.elevation, opt.radius, opt.fov_y, opt.width, opt.height);
}

std::vector<std::filesystem::path> export_turntable(const VoxelGrid& grid, const TurntableOptions& opt,
                                                    const std::filesystem::path& dir) {
  if (opt.frames < 0) throw InputError("turntable frame count must be non-negative");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (int f = 0; f < opt.frames; ++f) {
    const CameraPose pose = turntable_pose(opt, f);
    const RenderOutput out = render(grid, pose, opt.render);
    written.push_back(dir / fmt::format("frame_{:04d}.png", f));
    write_rgb_png(out.rgb, written.back());
    written.push_back(dir / fmt::format("depth_{:04d}.png", f));
    write_depth_png(out.depth, pose.near, pose.far, written.back());
  }
  return written;
}

}  // namespace sketchforge
