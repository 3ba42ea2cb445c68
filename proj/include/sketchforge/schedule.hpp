#pragma once

#include <random>
#include <string>
#include <vector>

#include "sketchforge/image.hpp"

namespace sketchforge {

enum class TimestepWeighting { constant, one_minus_alpha_bar };

std::string to_string(TimestepWeighting w);
TimestepWeighting parse_weighting(const std::string& name);

// Discrete diffusion schedule over steps t = 1..T. Arrays are stored 0-based
// (entry t-1 holds step t); use the accessors.
class NoiseSchedule {
 public:
  // Throws InputError unless every beta lies in (0,1).
  explicit NoiseSchedule(std::vector<double> betas, TimestepWeighting weighting = TimestepWeighting::one_minus_alpha_bar);

  // Linear betas from beta_start to beta_end inclusive.
  static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2,
                              TimestepWeighting weighting = TimestepWeighting::one_minus_alpha_bar);

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta(int t) const { return beta_[check(t)]; }
  double alpha(int t) const { return alpha_[check(t)]; }
  double alpha_bar(int t) const { return alpha_bar_[check(t)]; }
  double eta(int t) const { return eta_[check(t)]; }
  TimestepWeighting weighting() const { return weighting_; }

 private:
  size_t check(int t) const;

  std::vector<double> beta_, alpha_, alpha_bar_, eta_;
  TimestepWeighting weighting_;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Image add_noise(const NoiseSchedule& schedule, const Image& x0, int t, const Image& eps);

// One ancestral denoising step: (x_t - (1-alpha_t)/sqrt(1-abar_t) eps_pred) / sqrt(alpha_t) + eta_t eps_draw.
Image reverse_step(const NoiseSchedule& schedule, const Image& x_t, int t, const Image& eps_pred, const Image& eps_draw);

// SDS timestep weighting w(t).
double weight(const NoiseSchedule& schedule, int t);

// Images in [0,1] map to [-1,1] for the diffusion model and back.
constexpr double kGuidanceDomainScale = 2.0;
Image to_guidance_domain(const Image& x);
Image from_guidance_domain(const Image& x);

// Uniform timestep. With `clamp_extremes` the range is [ceil(0.02 T), floor(0.98 T)],
// otherwise [1, T].
int sample_timestep(const NoiseSchedule& schedule, std::mt19937_64& rng, bool clamp_extremes = true);

// Standard normal image of the given shape.
Image gaussian_image(int height, int width, int channels, std::mt19937_64& rng);

}  // namespace sketchforge
