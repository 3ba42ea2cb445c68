#include "sketchforge/guidance.hpp"

#include <cmath>
#include <numbers>

#include "sketchforge/errors.hpp"

namespace sketchforge {

namespace {

bool all_finite(const Image& x) {
  for (double v : x.data)
    if (!std::isfinite(v)) return false;
  return true;
}

Image dirac_eps(const Image& x_t, const Image& target, double alpha_bar) {
  if (!x_t.same_shape(target)) throw InputError("Dirac provider: target shape differs from x_t");
  const double a = std::sqrt(alpha_bar), inv_b = 1.0 / std::sqrt(1.0 - alpha_bar);
  Image eps = x_t;
  for (size_t i = 0; i < eps.size(); ++i) eps.data[i] = (x_t.data[i] - a * target.data[i]) * inv_b;
  return eps;
}

}  // namespace

void GuidanceRequest::validate(const NoiseSchedule& schedule) const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("guidance lambda must lie in [0,1]");
  if (x_t.channels != 3 || x_t.size() == 0) throw InputError("guidance x_t must be H x W x 3");
  if (!all_finite(x_t)) throw InputError("guidance x_t is not finite");
  schedule.alpha_bar(t);
  if (sketch && sketch->channels != 1) throw InputError("guidance sketch must be single channel");
}

Image cfg_combine(const GuidanceResponse& r, double s) {
  if (!r.eps_cond.same_shape(r.eps_uncond)) throw InputError("cfg_combine: shape mismatch");
  Image out = r.eps_cond;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = r.eps_cond.data[i] + s * (r.eps_cond.data[i] - r.eps_uncond.data[i]);
  return out;
}

DiracProvider::DiracProvider(Image text_target, NoiseSchedule schedule, std::optional<Image> sketch_target,
                             std::optional<Image> uncond_target)
    : text_target_(std::move(text_target)), schedule_(std::move(schedule)) {
  sketch_target_ = sketch_target ? std::move(*sketch_target) : text_target_;
  uncond_target_ = uncond_target ? std::move(*uncond_target) : Image(text_target_.height, text_target_.width, text_target_.channels);
  if (!sketch_target_.same_shape(text_target_) || !uncond_target_.same_shape(text_target_))
    throw InputError("Dirac provider targets must share one shape");
}

Image DiracProvider::conditional_target(double lambda) const {
  if (lambda == 0.0) return text_target_;
  if (lambda == 1.0) return sketch_target_;
  Image out = text_target_;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = (1.0 - lambda) * text_target_.data[i] + lambda * sketch_target_.data[i];
  return out;
}

GuidanceResponse DiracProvider::predict(const GuidanceRequest& req) {
  req.validate(schedule_);
  const double ab = schedule_.alpha_bar(req.t);
  return {dirac_eps(req.x_t, conditional_target(req.lambda), ab), dirac_eps(req.x_t, uncond_target_, ab)};
}

std::unique_ptr<GuidanceProvider> analytic_dirac_provider(const Image& target, const NoiseSchedule& schedule) {
  return std::make_unique<DiracProvider>(target, schedule);
}

SceneDiracProvider::SceneDiracProvider(VoxelGrid reference, NoiseSchedule schedule, RenderOptions render_options)
    : reference_(std::move(reference)), schedule_(std::move(schedule)), render_options_(render_options) {
  render_options_.stratified = false;
}

const Image& SceneDiracProvider::target_for(const CameraPose& pose) {
  const auto key = std::make_tuple(pose.position.x(), pose.position.y(), pose.position.z(), pose.width, pose.height);
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, render(reference_, pose, render_options_).rgb).first;
  return it->second;
}

GuidanceResponse SceneDiracProvider::predict(const GuidanceRequest& req) {
  req.validate(schedule_);
  if (!req.pose) throw InputError("scene Dirac provider needs the request pose");
  const Image target = to_guidance_domain(target_for(*req.pose));
  const double ab = schedule_.alpha_bar(req.t);
  const Image zero(target.height, target.width, target.channels);
  return {dirac_eps(req.x_t, target, ab), dirac_eps(req.x_t, zero, ab)};
}

Image sds_grad_image(const Image& eps_hat, const Image& eps, int t, const NoiseSchedule& schedule) {
  if (!eps_hat.same_shape(eps)) throw InputError("sds_grad_image: shape mismatch");
  const double scale = weight(schedule, t) * kGuidanceDomainScale;
  Image g = eps;
  for (size_t i = 0; i < g.size(); ++i) g.data[i] = scale * (eps_hat.data[i] - eps.data[i]);
  return g;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

double lambda_policy(double view_azimuth, double sketch_azimuth, double tolerance) {
  return std::abs(wrap_angle(view_azimuth - sketch_azimuth)) <= tolerance ? 1.0 : 0.0;
}

std::string view_prompt(const std::string& prompt, double azimuth, double /*elevation*/) {
  const double a = std::abs(wrap_angle(azimuth));
  constexpr double quarter = std::numbers::pi / 4.0;
  if (a <= quarter) return prompt + ", front view";
  if (a <= 3.0 * quarter) return prompt + ", side view";
  return prompt + ", back view";
}

}  // namespace sketchforge
