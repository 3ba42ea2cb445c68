#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>

#include "sketchforge/field.hpp"
#include "sketchforge/image.hpp"
#include "sketchforge/render.hpp"
#include "sketchforge/schedule.hpp"

namespace sketchforge {

struct GuidanceRequest {
  Image x_t;  // noised render, guidance domain, H x W x 3
  int t = 1;
  std::string prompt;           // already view-augmented
  std::optional<Image> sketch;  // single channel in [0,1]
  double lambda = 0.0;
  uint64_t seed = 0;
  // Camera the render came from. Local analytic providers may use it; it is
  // not part of the wire protocol.
  std::optional<CameraPose> pose;

  void validate(const NoiseSchedule& schedule) const;
};

struct GuidanceResponse {
  Image eps_cond;    // prediction conditioned on prompt and lambda-scaled sketch
  Image eps_uncond;  // unconditional prediction
};

// Noise predictor. Implementations must be deterministic given the request
// seed and must return arrays shaped like x_t. Predictions are values only;
// SDS never differentiates through the provider.
class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  virtual GuidanceResponse predict(const GuidanceRequest& request) = 0;
  virtual std::string identity() const = 0;
};

// eps_cond + s (eps_cond - eps_uncond).
Image cfg_combine(const GuidanceResponse& response, double guidance_scale);

// Optimal denoiser for data concentrated on a single image x*:
//   eps = (x_t - sqrt(abar_t) x*) / sqrt(1 - abar_t).
// The conditional target blends text and sketch targets by lambda; the
// unconditional target defaults to the zero image (mid-gray).
class DiracProvider : public GuidanceProvider {
 public:
  DiracProvider(Image text_target, NoiseSchedule schedule, std::optional<Image> sketch_target = std::nullopt,
                std::optional<Image> uncond_target = std::nullopt);

  GuidanceResponse predict(const GuidanceRequest& request) override;
  std::string identity() const override { return "dirac"; }

  // Blended target x*(lambda); lambda 0 and 1 return the endpoint targets exactly.
  Image conditional_target(double lambda) const;

 private:
  Image text_target_;
  Image sketch_target_;
  Image uncond_target_;
  NoiseSchedule schedule_;
};

std::unique_ptr<GuidanceProvider> analytic_dirac_provider(const Image& target, const NoiseSchedule& schedule);

// Dirac denoiser whose target is a reference scene rendered from the request
// pose, one target per viewpoint. Renders are cached per pose.
class SceneDiracProvider : public GuidanceProvider {
 public:
  SceneDiracProvider(VoxelGrid reference, NoiseSchedule schedule, RenderOptions render_options);

  GuidanceResponse predict(const GuidanceRequest& request) override;
  std::string identity() const override { return "dirac-scene"; }

  // Reference render in [0,1] for a pose.
  const Image& target_for(const CameraPose& pose);
  const VoxelGrid& reference() const { return reference_; }

 private:
  VoxelGrid reference_;
  NoiseSchedule schedule_;
  RenderOptions render_options_;
  std::map<std::tuple<double, double, double, int, int>, Image> cache_;
};

// Image-space SDS gradient w(t) (eps_hat - eps), including the factor of the
// [0,1] -> [-1,1] remap so the result is a gradient w.r.t. the render in [0,1].
Image sds_grad_image(const Image& eps_hat, const Image& eps, int t, const NoiseSchedule& schedule);

// 1 when the circular azimuth distance is within `tolerance` (inclusive), else 0.
double lambda_policy(double view_azimuth, double sketch_azimuth, double tolerance);

// Appends ", front view", ", side view" or ", back view" by azimuth (radians):
// front for |az| <= 45 deg, side for 45 < |az| <= 135 deg, back otherwise.
std::string view_prompt(const std::string& prompt, double azimuth, double elevation);

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace sketchforge
