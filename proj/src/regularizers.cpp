#include "sketchforge/regularizers.hpp"

#include <cmath>

#include "sketchforge/errors.hpp"
#include "sketchforge/render.hpp"

namespace sketchforge {

EmptinessResult emptiness_loss(std::span<const double> weights, double beta) {
  EmptinessResult out;
  out.d_weights.assign(weights.size(), 0.0);
  if (weights.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (w < 0.0) throw InputError("emptiness loss: negative sample weight");
    out.loss += std::log1p(beta * w);
    out.d_weights[i] = beta / (1.0 + beta * w) * inv_n;
  }
  out.loss *= inv_n;
  return out;
}

namespace {

struct Region {
  double opacity_sum = 0.0;
  double depth_sum = 0.0;
  size_t count = 0;

  double mean_depth() const { return depth_sum / std::max(opacity_sum, kDepthEpsilon); }
  double mean_opacity() const { return count ? opacity_sum / count : 0.0; }
};

}  // namespace

CenterDepthResult center_depth_loss(const Image& depth, const Image& trans, const CenterDepthParams& p) {
  if (!depth.same_shape(trans) || depth.channels != 1) throw InputError("center depth loss: shape mismatch");
  const int ch = std::max(1, static_cast<int>(std::lround(p.center_fraction * depth.height)));
  const int cw = std::max(1, static_cast<int>(std::lround(p.center_fraction * depth.width)));
  const int y0 = (depth.height - ch) / 2, x0 = (depth.width - cw) / 2;
  auto in_center = [&](int y, int x) { return y >= y0 && y < y0 + ch && x >= x0 && x < x0 + cw; };

  Region center, border;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      Region& r = in_center(y, x) ? center : border;
      const double o = 1.0 - trans.at(y, x);
      r.opacity_sum += o;
      r.depth_sum += o * depth.at(y, x);
      ++r.count;
    }

  CenterDepthResult out;
  out.d_depth = Image(depth.height, depth.width, 1);
  out.d_final_transmittance = Image(depth.height, depth.width, 1);
  const double gap = center.mean_depth() - border.mean_depth() + p.margin;
  const double oc = center.mean_opacity(), ob = border.mean_opacity();
  if (gap <= 0.0 || border.count == 0) return out;
  out.loss = oc * ob * gap;

  const double g_depth_c = oc * ob, g_depth_b = -oc * ob;
  const double g_op_c = ob * gap, g_op_b = oc * gap;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      const bool c = in_center(y, x);
      const Region& r = c ? center : border;
      const double g_mean_depth = c ? g_depth_c : g_depth_b;
      const double g_mean_op = c ? g_op_c : g_op_b;
      const double o = 1.0 - trans.at(y, x);
      const double d = depth.at(y, x);
      const double denom = std::max(r.opacity_sum, kDepthEpsilon);
      out.d_depth.at(y, x) = g_mean_depth * o / denom;
      const double d_mean_depth_d_o =
          r.opacity_sum > kDepthEpsilon ? (d - r.mean_depth()) / r.opacity_sum : d / kDepthEpsilon;
      const double g_o = g_mean_depth * d_mean_depth_d_o + g_mean_op / static_cast<double>(r.count);
      out.d_final_transmittance.at(y, x) = -g_o;
    }
  return out;
}

}  // namespace sketchforge
