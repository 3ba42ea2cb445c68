#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "sketchforge/errors.hpp"
#include "sketchforge/render.hpp"
#include "test_support.hpp"

using namespace sketchforge;
using sketchforge::testing::central_difference;
using sketchforge::testing::random_grid;
using sketchforge::testing::relative_error;

namespace {

CameraPose axis_camera(int w, int h, double fov, double near, double far) {
  CameraPose pose;
  pose.position = {0.0, 0.0, 3.0};
  pose.look_at = Eigen::Vector3d::Zero();
  pose.up = Eigen::Vector3d::UnitY();
  pose.fov_y = fov;
  pose.width = w;
  pose.height = h;
  pose.near = near;
  pose.far = far;
  return pose;
}

VoxelGrid constant_grid(double sigma, double feat, int n = 4) {
  VoxelGrid g({n, n, n}, Bounds{}, DensityActivation::relu, 0.0);
  for (float& v : g.density_logits) v = static_cast<float>(sigma);
  for (float& v : g.color_feats) v = static_cast<float>(feat);
  return g;
}

}  // namespace

TEST_CASE("1x1 image has a single ray along the view axis") {
  const auto rays = make_rays(axis_camera(1, 1, 0.7, 1.0, 5.0));
  REQUIRE(rays.size() == 1);
  CHECK((rays[0].direction - Eigen::Vector3d(0, 0, -1)).norm() < 1e-15);
}

TEST_CASE("odd-sized image center ray points at look_at") {
  CameraPose pose = axis_camera(5, 7, 0.9, 1.0, 5.0);
  pose.position = {1.0, 2.0, 2.5};
  pose.look_at = {0.1, -0.2, 0.3};
  const auto rays = make_rays(pose);
  const Eigen::Vector3d axis = (pose.look_at - pose.position).normalized();
  CHECK((rays[3 * 5 + 2].direction - axis).norm() < 1e-14);
  for (const Ray& r : rays) CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
}

TEST_CASE("mirroring the camera across the y-z plane mirrors the rays") {
  CameraPose pose = axis_camera(6, 4, 0.8, 1.0, 5.0);
  pose.position = {0.7, 0.4, 2.1};
  pose.look_at = {0.2, -0.1, 0.0};
  pose.up = Eigen::Vector3d(0.1, 1.0, 0.05).normalized();
  CameraPose mirrored = pose;
  const Eigen::Vector3d flip(-1.0, 1.0, 1.0);
  mirrored.position = pose.position.cwiseProduct(flip);
  mirrored.look_at = pose.look_at.cwiseProduct(flip);
  mirrored.up = pose.up.cwiseProduct(flip);
  const auto a = make_rays(pose);
  const auto b = make_rays(mirrored);
  for (int y = 0; y < pose.height; ++y)
    for (int x = 0; x < pose.width; ++x) {
      const Ray& ra = a[y * pose.width + x];
      const Ray& rb = b[y * pose.width + (pose.width - 1 - x)];
      CHECK((ra.direction.cwiseProduct(flip) - rb.direction).norm() < 1e-14);
      CHECK((ra.origin.cwiseProduct(flip) - rb.origin).norm() == 0.0);
    }
}

TEST_CASE("3x3 corner ray angle matches pinhole geometry") {
  const auto rays = make_rays(axis_camera(3, 3, std::numbers::pi / 2, 1.0, 5.0));
  // Corner pixel center sits at normalized offsets (+-2/3, +-2/3) at unit focal distance.
  const double expected = std::atan(std::sqrt(2.0) * 2.0 / 3.0);
  for (int idx : {0, 2, 6, 8}) {
    const double angle = std::acos(std::clamp(rays[idx].direction.dot(Eigen::Vector3d(0, 0, -1)), -1.0, 1.0));
    CHECK(std::abs(angle - expected) < 1e-9);
  }
  CHECK(rays[0].direction.x() < 0);
  CHECK(rays[0].direction.y() > 0);
}

TEST_CASE("invalid camera poses are rejected") {
  CameraPose pose = axis_camera(4, 4, 0.7, 1.0, 5.0);
  pose.up = {0, 0, 1};
  CHECK_THROWS_AS(make_rays(pose), InputError);
  pose = axis_camera(4, 4, 0.7, 2.0, 1.0);
  CHECK_THROWS_AS(make_rays(pose), InputError);
  pose = axis_camera(4, 4, std::numbers::pi, 1.0, 2.0);
  CHECK_THROWS_AS(make_rays(pose), InputError);
  pose = axis_camera(0, 4, 0.7, 1.0, 2.0);
  CHECK_THROWS_AS(make_rays(pose), InputError);
}

TEST_CASE("empty scene renders black with full transmittance") {
  const VoxelGrid g = constant_grid(-1.0, 0.3);
  const RenderOutput out = render(g, axis_camera(4, 4, 0.7, 1.5, 4.5), {16, true, 3});
  for (double v : out.rgb.data) CHECK(v == 0.0);
  for (double v : out.final_transmittance.data) CHECK(v == 1.0);
  for (double v : out.sample_weights) CHECK(v == 0.0);
}

TEST_CASE("homogeneous medium converges to the analytic integral") {
  const double sigma0 = 1.3, feat = 0.4;
  const double c0 = 1.0 / (1.0 + std::exp(-feat));
  const VoxelGrid g = constant_grid(sigma0, feat);
  const CameraPose pose = axis_camera(1, 1, 0.1, 2.5, 3.5);  // segment z in [-0.5, 0.5]
  const double L = 1.0;
  const double T = std::exp(-sigma0 * L);
  for (bool stratified : {false, true}) {
    const RenderOutput out = render(g, pose, {4096, stratified, 17});
    CHECK(std::abs(out.rgb.data[0] - c0 * (1.0 - T)) < 1e-3);
    CHECK(std::abs(out.final_transmittance.data[0] - T) < 1e-3);
  }
}

TEST_CASE("opaque thin slab matches a fine-step quadrature oracle") {
  // Slab of relu density on the vertex plane z = 0.25 of a 33^3 grid.
  VoxelGrid g({33, 33, 33}, Bounds{}, DensityActivation::relu, 0.0);
  for (float& v : g.density_logits) v = 0.0f;
  for (int j = 0; j < 33; ++j)
    for (int i = 0; i < 33; ++i) g.density_logits[g.index(i, j, 20)] = 5000.0f;
  for (size_t v = 0; v < g.vertex_count(); ++v) {
    g.color_feats[3 * v] = 1.5f;
    g.color_feats[3 * v + 1] = -0.5f;
    g.color_feats[3 * v + 2] = 0.2f;
  }
  const CameraPose pose = axis_camera(1, 1, 0.1, 2.0, 4.0);
  const int n = 256;
  const RenderOutput out = render(g, pose, {n, false, 0});

  // Oracle: left Riemann transmittance product with 10x finer steps, using query() directly.
  const Ray ray = make_rays(pose)[0];
  const int fine = 10 * n;
  const double dk = (ray.far - ray.near) / fine;
  double trans = 1.0, depth_num = 0.0, opacity = 0.0;
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  for (int i = 0; i < fine; ++i) {
    const double k = ray.near + (i + 0.5) * dk;
    const FieldSample s = query(g, ray.origin + k * ray.direction, ray.direction);
    const double a = 1.0 - std::exp(-s.sigma * dk);
    rgb += trans * a * s.color;
    depth_num += trans * a * k;
    opacity += trans * a;
    trans *= 1.0 - a;
  }
  const double spacing = (ray.far - ray.near) / n;
  CHECK(std::abs(out.depth.data[0] - depth_num / opacity) < spacing);
  CHECK(std::abs(out.depth.data[0] - 2.75) < 2.0 / 32.0);
  const Eigen::Vector3d slab(1.0 / (1.0 + std::exp(-1.5)), 1.0 / (1.0 + std::exp(0.5)), 1.0 / (1.0 + std::exp(-0.2)));
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(out.rgb.data[c] - slab[c]) < 1e-3);
    CHECK(std::abs(rgb[c] - slab[c]) < 1e-3);
  }
}

TEST_CASE("weights plus final transmittance sum to one and transmittance is monotone") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int rays_checked = 0;
  for (int scene = 0; scene < 10; ++scene) {
    const VoxelGrid g = random_grid(6, 100 + scene, DensityActivation::softplus, 1.0, 3.0);
    const CameraPose pose = orbit_pose(2 * std::numbers::pi * u(rng), u(rng) - 0.5, 2.5 + u(rng), 0.8, 10, 10);
    const RenderOutput out = render(g, pose, {32, true, static_cast<uint64_t>(scene)});
    for (size_t r = 0; r < out.rgb.pixels(); ++r) {
      double sum = 0.0, t = 1.0;
      for (int i = 0; i < out.n_samples; ++i) {
        const double w = out.sample_weights[r * out.n_samples + i];
        CHECK(w >= 0.0);
        sum += w;
        const double t_next = 1.0 - sum;
        CHECK(t_next <= t + 1e-12);
        t = t_next;
      }
      CHECK(std::abs(sum + out.final_transmittance.data[r] - 1.0) < 1e-6);
      ++rays_checked;
    }
  }
  CHECK(rays_checked == 1000);
}

TEST_CASE("quadrature error shrinks at least by half when samples double on a smooth field") {
  // A single cell keeps the field smooth, and the segment stays inside the bounds.
  const VoxelGrid g = random_grid(2, 77, DensityActivation::softplus, 0.5, 1.0);
  const CameraPose pose = axis_camera(3, 3, 0.2, 2.2, 3.8);
  const RenderOutput ref = render(g, pose, {16384, false, 0});
  double prev = -1.0;
  for (int n : {16, 32, 64, 128}) {
    const RenderOutput out = render(g, pose, {n, false, 0});
    double err = 0.0;
    for (size_t i = 0; i < out.rgb.size(); ++i) err = std::max(err, std::abs(out.rgb.data[i] - ref.rgb.data[i]));
    if (prev > 0) CHECK(err <= 0.5 * prev);
    prev = err;
  }
}

TEST_CASE("render_backward is linear in the upstream") {
  const VoxelGrid g = random_grid(6, 9);
  const CameraPose pose = orbit_pose(0.4, 0.3, 3.0, 0.7, 5, 4);
  const RenderOptions opt{16, true, 21};
  RenderUpstream zero;
  zero.rgb = Image(4, 5, 3);
  const FieldGradients gz = render_backward(g, pose, opt, zero);
  for (double v : gz.d_density_logits) CHECK(v == 0.0);
  for (double v : gz.d_color_feats) CHECK(v == 0.0);

  RenderUpstream up;
  up.rgb = sketchforge::testing::random_image(4, 5, 3, 1, -1.0, 1.0);
  up.depth = sketchforge::testing::random_image(4, 5, 1, 2, -1.0, 1.0);
  RenderUpstream up2 = up;
  for (double& v : up2.rgb.data) v *= 2.0;
  for (double& v : up2.depth.data) v *= 2.0;
  const FieldGradients g1 = render_backward(g, pose, opt, up);
  const FieldGradients g2 = render_backward(g, pose, opt, up2);
  for (size_t i = 0; i < g1.d_density_logits.size(); ++i) CHECK(g2.d_density_logits[i] == 2.0 * g1.d_density_logits[i]);
  for (size_t i = 0; i < g1.d_color_feats.size(); ++i) CHECK(g2.d_color_feats[i] == 2.0 * g1.d_color_feats[i]);

  RenderUpstream bad;
  bad.rgb = Image(3, 5, 3);
  CHECK_THROWS_AS(render_backward(g, pose, opt, bad), InputError);
}

TEST_CASE("render_backward does not depend on the worker count") {
  const VoxelGrid g = random_grid(8, 19);
  const CameraPose pose = orbit_pose(1.0, 0.2, 3.0, 0.7, 16, 12);
  RenderUpstream up;
  up.rgb = sketchforge::testing::random_image(12, 16, 3, 4, -1.0, 1.0);
  RenderOptions a{24, true, 8};
  a.workers = 1;
  RenderOptions b = a;
  b.workers = 5;
  const FieldGradients ga = render_backward(g, pose, a, up);
  const FieldGradients gb = render_backward(g, pose, b, up);
  CHECK(ga.d_density_logits == gb.d_density_logits);
  CHECK(ga.d_color_feats == gb.d_color_feats);
}

TEST_CASE("single-pixel render gradient matches central finite differences") {
  VoxelGrid g = random_grid(8, 31, DensityActivation::softplus, 0.5, 1.5);
  const CameraPose pose = orbit_pose(0.7, 0.25, 2.8, 0.8, 6, 6);
  const RenderOptions opt{16, true, 5};
  const int pixel = 2 * 6 + 3;
  const Eigen::Vector3d w_rgb(0.8, -0.6, 0.3);
  const double w_depth = 0.25, w_trans = -0.4;
  auto objective = [&] {
    const RenderOutput o = render(g, pose, opt);
    return w_rgb.dot(Eigen::Vector3d(o.rgb.data[3 * pixel], o.rgb.data[3 * pixel + 1], o.rgb.data[3 * pixel + 2])) +
           w_depth * o.depth.data[pixel] + w_trans * o.final_transmittance.data[pixel];
  };
  RenderUpstream up;
  up.rgb = Image(6, 6, 3);
  up.depth = Image(6, 6, 1);
  up.final_transmittance = Image(6, 6, 1);
  for (int c = 0; c < 3; ++c) up.rgb.data[3 * pixel + c] = w_rgb[c];
  up.depth.data[pixel] = w_depth;
  up.final_transmittance.data[pixel] = w_trans;
  const FieldGradients grads = render_backward(g, pose, opt, up);
  int probes = 0;
  for (size_t v = 0; v < g.vertex_count(); ++v) {
    if (grads.d_density_logits[v] == 0.0) continue;
    const double fd = central_difference(g.density_logits[v], 1e-3, objective);
    CHECK(relative_error(grads.d_density_logits[v], fd, 1e-7) < 1e-4);
    for (int c = 0; c < 3; ++c) {
      const double fdc = central_difference(g.color_feats[3 * v + c], 1e-3, objective);
      CHECK(relative_error(grads.d_color_feats[3 * v + c], fdc, 1e-7) < 1e-4);
    }
    ++probes;
  }
  CHECK(probes >= 8);
}

TEST_CASE("sample-weight upstream gradient matches finite differences along a random direction") {
  VoxelGrid g = random_grid(6, 12);
  const CameraPose pose = orbit_pose(2.0, -0.2, 3.0, 0.6, 3, 3);
  const RenderOptions opt{12, true, 9};
  const auto coeff = sketchforge::testing::random_image(1, 9 * 12, 1, 3, -1.0, 1.0).data;
  RenderUpstream up;
  up.rgb = Image(3, 3, 3);
  up.sample_weights = coeff;
  const FieldGradients grads = render_backward(g, pose, opt, up);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<double> dir(g.vertex_count());
  for (double& d : dir) d = normal(rng);
  double analytic = 0.0;
  for (size_t v = 0; v < dir.size(); ++v) analytic += grads.d_density_logits[v] * dir[v];
  const VoxelGrid base = g;
  auto at = [&](double h) {
    for (size_t v = 0; v < dir.size(); ++v) g.density_logits[v] = static_cast<float>(base.density_logits[v] + h * dir[v]);
    const RenderOutput o = render(g, pose, opt);
    double s = 0.0;
    for (size_t i = 0; i < coeff.size(); ++i) s += coeff[i] * o.sample_weights[i];
    return s;
  };
  // Realized float steps differ per entry, so use a step large enough that rounding is negligible.
  const double h = 1e-2;
  const double numeric = (at(h) - at(-h)) / (2 * h);
  CHECK(relative_error(analytic, numeric) < 1e-3);
}
