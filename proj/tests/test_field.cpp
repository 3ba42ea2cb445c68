#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "sketchforge/errors.hpp"
#include "sketchforge/field.hpp"
#include "test_support.hpp"

using namespace sketchforge;
using sketchforge::testing::central_difference;
using sketchforge::testing::random_grid;
using sketchforge::testing::relative_error;

TEST_CASE("zero density everywhere returns zero sigma and the activated color") {
  VoxelGrid g({4, 4, 4}, Bounds{}, DensityActivation::relu, 0.0);
  for (float& v : g.density_logits) v = -1.0f;
  for (size_t i = 0; i < g.color_feats.size(); ++i) g.color_feats[i] = 0.3f;
  const FieldSample s = query(g, {0.13, -0.4, 0.77}, {0, 0, 1});
  CHECK(s.sigma == 0.0);
  for (int c = 0; c < 3; ++c) CHECK(s.color[c] == doctest::Approx(sigmoid(0.3f)).epsilon(1e-12));
}

TEST_CASE("query at a vertex returns that vertex's activated values") {
  const VoxelGrid g = random_grid(5, 11);
  for (auto [i, j, k] : {std::array{0, 0, 0}, std::array{4, 4, 4}, std::array{2, 1, 3}, std::array{4, 0, 2}}) {
    const size_t v = g.index(i, j, k);
    const FieldSample s = query(g, g.vertex_position(i, j, k), {1, 0, 0});
    CHECK(s.sigma == doctest::Approx(activate_density(g.density_activation, g.density_logits[v])).epsilon(1e-12));
    for (int c = 0; c < 3; ++c) CHECK(s.color[c] == doctest::Approx(sigmoid(g.color_feats[3 * v + c])).epsilon(1e-12));
  }
}

TEST_CASE("cell center with relu and positive logits is the mean of the eight corners") {
  VoxelGrid g = random_grid(4, 3, DensityActivation::relu, 2.0, 1.0);
  // Brute force: the eight corners of cell (1,0,2) each carry weight 1/8 at the center.
  double mean = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) mean += g.density_logits[g.index(1 + dx, 0 + dy, 2 + dz)] / 8.0;
  const Eigen::Vector3d center = 0.5 * (g.vertex_position(1, 0, 2) + g.vertex_position(2, 1, 3));
  CHECK(query(g, center, {0, 1, 0}).sigma == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("out-of-bounds queries are empty and non-finite points are rejected") {
  const VoxelGrid g = random_grid(4, 5);
  const FieldSample s = query(g, {1.0001, 0, 0}, {1, 0, 0});
  CHECK(s.sigma == 0.0);
  CHECK(s.color.isZero());
  CHECK_THROWS_AS(query(g, {std::numeric_limits<double>::quiet_NaN(), 0, 0}, {1, 0, 0}), InputError);
  CHECK_THROWS_AS(query(g, {0, std::numeric_limits<double>::infinity(), 0}, {1, 0, 0}), InputError);
}

TEST_CASE("grid invariants are validated") {
  CHECK_THROWS_AS(VoxelGrid({1, 4, 4}, Bounds{}), InputError);
  Bounds flat;
  flat.hi[2] = flat.lo[2];
  CHECK_THROWS_AS(VoxelGrid({4, 4, 4}, flat), InputError);
}

TEST_CASE("default grid is faint fog and mid-gray") {
  const VoxelGrid g = make_default_grid(8);
  const FieldSample s = query(g, {0.1, 0.2, -0.3}, {0, 0, 1});
  CHECK(s.sigma == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(s.color[1] == doctest::Approx(0.5));
}

TEST_CASE("activated values stay in range") {
  const VoxelGrid g = random_grid(6, 99, DensityActivation::softplus, 0.0, 8.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int i = 0; i < 2000; ++i) {
    const FieldSample s = query(g, {u(rng), u(rng), u(rng)}, {0, 0, 1});
    CHECK(s.sigma >= 0.0);
    CHECK((s.color.array() >= 0.0).all());
    CHECK((s.color.array() <= 1.0).all());
  }
}

TEST_CASE("query is continuous across cell faces") {
  const VoxelGrid g = random_grid(5, 8);
  const double face = g.vertex_position(2, 0, 0).x();
  const double eps = 1e-9;
  const FieldSample a = query(g, {face - eps, 0.1, 0.2}, {0, 0, 1});
  const FieldSample b = query(g, {face + eps, 0.1, 0.2}, {0, 0, 1});
  CHECK(std::abs(a.sigma - b.sigma) < 1e-7);
  CHECK((a.color - b.color).norm() < 1e-7);
}

TEST_CASE("query_backward with zero upstream contributes nothing") {
  const VoxelGrid g = random_grid(4, 2);
  FieldGradients grads(g);
  query_backward(g, {0.1, 0.2, 0.3}, {0, 0, 1}, 0.0, Eigen::Vector3d::Zero(), grads);
  for (double v : grads.d_density_logits) CHECK(v == 0.0);
  for (double v : grads.d_color_feats) CHECK(v == 0.0);
}

TEST_CASE("query_backward at a vertex lands on exactly one vertex") {
  VoxelGrid g = random_grid(4, 4, DensityActivation::relu, 2.0, 0.5);
  FieldGradients grads(g);
  query_backward(g, g.vertex_position(1, 2, 1), {0, 0, 1}, 1.0, Eigen::Vector3d(0.5, -1.0, 2.0), grads);
  int touched = 0;
  for (size_t v = 0; v < g.vertex_count(); ++v)
    if (grads.d_density_logits[v] != 0.0) {
      ++touched;
      CHECK(v == g.index(1, 2, 1));
      CHECK(grads.d_density_logits[v] == doctest::Approx(1.0));
    }
  CHECK(touched == 1);
}

TEST_CASE("query_backward is zero out of bounds and rejects non-finite upstream") {
  const VoxelGrid g = random_grid(4, 6);
  FieldGradients grads(g);
  query_backward(g, {2.0, 0, 0}, {0, 0, 1}, 1.0, Eigen::Vector3d::Ones(), grads);
  CHECK(grads.all_finite());
  for (double v : grads.d_density_logits) CHECK(v == 0.0);
  CHECK_THROWS_AS(query_backward(g, {0, 0, 0}, {0, 0, 1}, std::numeric_limits<double>::quiet_NaN(),
                                 Eigen::Vector3d::Zero(), grads),
                  InputError);
}

TEST_CASE("query_backward matches central finite differences") {
  for (DensityActivation act : {DensityActivation::softplus, DensityActivation::exp}) {
    VoxelGrid g = random_grid(5, 42, act, act == DensityActivation::exp ? -0.5 : 0.5, 1.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.95, 0.95);
    const Eigen::Vector3d dc(0.7, -1.3, 0.4);
    const double ds = 0.9;
    for (int probe = 0; probe < 10; ++probe) {
      const Eigen::Vector3d p(u(rng), u(rng), u(rng));
      auto objective = [&] {
        const FieldSample s = query(g, p, {0, 0, 1});
        return ds * s.sigma + dc.dot(s.color);
      };
      FieldGradients grads(g);
      query_backward(g, p, {0, 0, 1}, ds, dc, grads);
      CellStencil st;
      REQUIRE(locate(g, p, st));
      for (int c = 0; c < 8; ++c) {
        const size_t v = st.vertex[c];
        const double fd = central_difference(g.density_logits[v], 1e-3, objective);
        CHECK(relative_error(grads.d_density_logits[v], fd) < 1e-4);
        for (int ch = 0; ch < 3; ++ch) {
          const double fdc = central_difference(g.color_feats[3 * v + ch], 1e-3, objective);
          CHECK(relative_error(grads.d_color_feats[3 * v + ch], fdc) < 1e-4);
        }
      }
    }
  }
}
