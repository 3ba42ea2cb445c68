#include "sketchforge/schedule.hpp"

#include <cmath>
#include <fmt/format.h>

#include "sketchforge/errors.hpp"

namespace sketchforge {

std::string to_string(TimestepWeighting w) {
  return w == TimestepWeighting::constant ? "constant" : "one_minus_alpha_bar";
}

TimestepWeighting parse_weighting(const std::string& name) {
  if (name == "constant") return TimestepWeighting::constant;
  if (name == "one_minus_alpha_bar") return TimestepWeighting::one_minus_alpha_bar;
  throw InputError(fmt::format("unknown timestep weighting '{}'", name));
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas, TimestepWeighting weighting)
    : beta_(std::move(betas)), weighting_(weighting) {
  if (beta_.empty()) throw InputError("noise schedule needs at least one step");
  alpha_.resize(beta_.size());
  alpha_bar_.resize(beta_.size());
  eta_.resize(beta_.size());
  double running = 1.0;
  for (size_t i = 0; i < beta_.size(); ++i) {
    const double b = beta_[i];
    if (!(b > 0.0 && b < 1.0)) throw InputError(fmt::format("beta_{} = {} is outside (0,1)", i + 1, b));
    alpha_[i] = 1.0 - b;
    running *= alpha_[i];
    alpha_bar_[i] = running;
    eta_[i] = std::sqrt(b);
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end, TimestepWeighting weighting) {
  if (steps < 1) throw InputError("noise schedule needs at least one step");
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i)
    betas[i] = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (steps - 1);
  return NoiseSchedule(std::move(betas), weighting);
}

size_t NoiseSchedule::check(int t) const {
  if (t < 1 || t > steps()) throw InputError(fmt::format("timestep {} outside [1, {}]", t, steps()));
  return static_cast<size_t>(t - 1);
}

Image add_noise(const NoiseSchedule& schedule, const Image& x0, int t, const Image& eps) {
  if (!x0.same_shape(eps)) throw InputError("add_noise: eps shape differs from x0");
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  Image out = x0;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = a * x0.data[i] + b * eps.data[i];
  return out;
}

Image reverse_step(const NoiseSchedule& schedule, const Image& x_t, int t, const Image& eps_pred, const Image& eps_draw) {
  if (t < 2 || t > schedule.steps()) throw InputError(fmt::format("reverse_step: timestep {} outside [2, {}]", t, schedule.steps()));
  if (!x_t.same_shape(eps_pred) || !x_t.same_shape(eps_draw)) throw InputError("reverse_step: shape mismatch");
  const double alpha = schedule.alpha(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double coef = (1.0 - alpha) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double eta = schedule.eta(t);
  Image out = x_t;
  for (size_t i = 0; i < out.size(); ++i)
    out.data[i] = inv_sqrt_alpha * (x_t.data[i] - coef * eps_pred.data[i]) + eta * eps_draw.data[i];
  return out;
}

double weight(const NoiseSchedule& schedule, int t) {
  const double ab = schedule.alpha_bar(t);
  return schedule.weighting() == TimestepWeighting::constant ? 1.0 : 1.0 - ab;
}

Image to_guidance_domain(const Image& x) {
  Image out = x;
  for (double& v : out.data) v = kGuidanceDomainScale * v - 1.0;
  return out;
}

Image from_guidance_domain(const Image& x) {
  Image out = x;
  for (double& v : out.data) v = (v + 1.0) / kGuidanceDomainScale;
  return out;
}

int sample_timestep(const NoiseSchedule& schedule, std::mt19937_64& rng, bool clamp_extremes) {
  const int T = schedule.steps();
  int lo = 1, hi = T;
  if (clamp_extremes) {
    lo = std::max(1, static_cast<int>(std::ceil(0.02 * T)));
    hi = std::max(lo, static_cast<int>(std::floor(0.98 * T)));
  }
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Image gaussian_image(int height, int width, int channels, std::mt19937_64& rng) {
  Image out(height, width, channels);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.data) v = normal(rng);
  return out;
}

}  // namespace sketchforge
