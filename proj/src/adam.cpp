#include "sketchforge/adam.hpp"

#include <cmath>

#include "sketchforge/errors.hpp"

namespace sketchforge {

OptimizerState::OptimizerState(const VoxelGrid& grid, AdamParams p)
    : params(p),
      m_density(grid.vertex_count(), 0.0f),
      v_density(grid.vertex_count(), 0.0f),
      m_color(3 * grid.vertex_count(), 0.0f),
      v_color(3 * grid.vertex_count(), 0.0f) {}

bool OptimizerState::matches(const VoxelGrid& grid) const {
  return m_density.size() == grid.vertex_count() && v_density.size() == grid.vertex_count() &&
         m_color.size() == 3 * grid.vertex_count() && v_color.size() == 3 * grid.vertex_count();
}

namespace {

void update(std::vector<float>& param, const std::vector<double>& grad, std::vector<float>& m, std::vector<float>& v,
            double lr, const AdamParams& p, double bias1, double bias2) {
  for (size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = p.beta1 * m[i] + (1.0 - p.beta1) * g;
    const double vi = p.beta2 * v[i] + (1.0 - p.beta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double m_hat = static_cast<double>(m[i]) / bias1;
    const double v_hat = static_cast<double>(v[i]) / bias2;
    param[i] = static_cast<float>(param[i] - lr * m_hat / (std::sqrt(v_hat) + p.epsilon));
  }
}

}  // namespace

void adam_step(VoxelGrid& grid, const FieldGradients& grads, OptimizerState& state) {
  if (!grads.matches(grid) || !state.matches(grid)) throw InputError("adam_step: shape mismatch");
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.params.beta1, t);
  const double bias2 = 1.0 - std::pow(state.params.beta2, t);
  update(grid.density_logits, grads.d_density_logits, state.m_density, state.v_density, state.params.lr_density,
         state.params, bias1, bias2);
  update(grid.color_feats, grads.d_color_feats, state.m_color, state.v_color, state.params.lr_color, state.params,
         bias1, bias2);
}

}  // namespace sketchforge
