#include "sketchforge/trainer.hpp"

#include <cmath>
#include <fmt/format.h>
#include "json.hpp"
#include <numbers>

#include "sketchforge/counter_rng.hpp"
#include "sketchforge/errors.hpp"

namespace sketchforge {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (width < 1 || height < 1) throw ConfigError("render size must be at least 1x1");
  if (n_samples < 2) throw ConfigError("n_samples must be >= 2");
  if (!(camera.radius_min > 0.0) || camera.radius_max < camera.radius_min)
    throw ConfigError("camera radius range must be positive and ordered");
  if (camera.elevation_max < camera.elevation_min) throw ConfigError("camera elevation range is inverted");
  if (camera.azimuth_count < 0) throw ConfigError("camera azimuth_count must be >= 0");
  for (double w : {weights.sds, weights.sketch, weights.emptiness, weights.center_depth})
    if (!(w >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (sketch_every_n < 1) throw ConfigError("sketch_loss.every_n must be >= 1");
  if (!(lambda_tolerance >= 0.0)) throw ConfigError("lambda tolerance must be >= 0");
  if (!(adam.lr_density >= 0.0 && adam.lr_color >= 0.0)) throw ConfigError("learning rates must be >= 0");
}

std::mt19937_64 step_rng(uint64_t seed, uint64_t iteration) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(iteration),
                    static_cast<uint32_t>(iteration >> 32)};
  return std::mt19937_64(seq);
}

CameraSample sample_camera(const TrainConfig& config, std::mt19937_64& rng) {
  const CameraDistribution& cam = config.camera;
  CameraSample s;
  s.radius = std::uniform_real_distribution<double>(cam.radius_min, cam.radius_max)(rng);
  if (cam.azimuth_count > 0) {
    const int k = std::uniform_int_distribution<int>(0, cam.azimuth_count - 1)(rng);
    s.azimuth = 2.0 * std::numbers::pi * k / cam.azimuth_count;
  } else {
    s.azimuth = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  }
  s.elevation = std::uniform_real_distribution<double>(cam.elevation_min, cam.elevation_max)(rng);
  s.pose = orbit_pose(s.azimuth, s.elevation, s.radius, cam.fov_y, config.width, config.height);
  return s;
}

CameraPose sketch_view_pose(const TrainConfig& config) {
  const double radius = 0.5 * (config.camera.radius_min + config.camera.radius_max);
  return orbit_pose(config.sketch_azimuth, config.sketch_elevation, radius, config.camera.fov_y, config.width,
                    config.height);
}

RenderUpstream StepGradients::total() const {
  RenderUpstream up;
  up.rgb = sds;
  for (size_t i = 0; i < up.rgb.size(); ++i) up.rgb.data[i] += sketch.data[i];
  up.depth = center_depth.d_depth;
  up.final_transmittance = center_depth.d_final_transmittance;
  up.sample_weights = emptiness.d_weights;
  return up;
}

StepGradients compute_step_gradients(const VoxelGrid& grid, const StepContext& ctx, uint64_t iteration) {
  const TrainConfig& cfg = ctx.config;
  std::mt19937_64 rng = step_rng(cfg.seed, iteration);
  StepGradients g;
  g.camera = sample_camera(cfg, rng);
  g.render_options.n_samples = cfg.n_samples;
  g.render_options.stratified = cfg.stratified;
  g.render_options.seed = splitmix64(cfg.seed ^ splitmix64(iteration));
  g.render_options.white_background = cfg.white_background;
  g.render_options.workers = cfg.workers;
  g.render = render(grid, g.camera.pose, g.render_options);
  const Image& rgb = g.render.rgb;

  StepMetrics& m = g.metrics;
  m.iteration = iteration;
  m.azimuth = g.camera.azimuth;

  const bool have_sketch = ctx.sketch != nullptr;
  m.lambda = have_sketch ? lambda_policy(g.camera.azimuth, cfg.sketch_azimuth, cfg.lambda_tolerance) : 0.0;
  m.timestep = sample_timestep(ctx.schedule, rng, cfg.clamp_timesteps);
  const Image eps = gaussian_image(rgb.height, rgb.width, 3, rng);
  const uint64_t request_seed = rng();

  g.sds = Image(rgb.height, rgb.width, 3);
  if (cfg.weights.sds > 0.0) {
    GuidanceRequest req;
    req.x_t = add_noise(ctx.schedule, to_guidance_domain(rgb), m.timestep, eps);
    req.t = m.timestep;
    req.prompt = view_prompt(cfg.prompt, g.camera.azimuth, g.camera.elevation);
    if (have_sketch) req.sketch = ctx.sketch->strokes;
    req.lambda = m.lambda;
    req.seed = request_seed;
    req.pose = g.camera.pose;
    const GuidanceResponse resp = ctx.guidance.predict(req);
    if (!resp.eps_cond.same_shape(rgb) || !resp.eps_uncond.same_shape(rgb))
      throw ProtocolError("guidance response shape differs from the render");
    const Image eps_hat = cfg_combine(resp, cfg.guidance_scale);
    double sq = 0.0;
    for (size_t i = 0; i < eps.size(); ++i) sq += (eps_hat.data[i] - eps.data[i]) * (eps_hat.data[i] - eps.data[i]);
    m.loss_sds = weight(ctx.schedule, m.timestep) * sq / static_cast<double>(eps.size());
    g.sds = sds_grad_image(eps_hat, eps, m.timestep, ctx.schedule);
    for (double& v : g.sds.data) v *= cfg.weights.sds;
  }

  g.sketch = Image(rgb.height, rgb.width, 3);
  if (cfg.weights.sketch > 0.0 && have_sketch && ctx.sketch_provider && iteration % cfg.sketch_every_n == 0) {
    const SketchLossResult r = sketch_loss(*ctx.sketch_provider, rgb, *ctx.sketch);
    m.loss_sketch = r.loss;
    g.sketch = r.d_loss_dx;
    for (double& v : g.sketch.data) v *= cfg.weights.sketch;
  }

  if (cfg.weights.emptiness > 0.0) {
    g.emptiness = emptiness_loss(g.render.sample_weights, cfg.emptiness_beta);
    m.loss_emptiness = g.emptiness.loss;
    for (double& v : g.emptiness.d_weights) v *= cfg.weights.emptiness;
  }

  if (cfg.weights.center_depth > 0.0) {
    g.center_depth = center_depth_loss(g.render.depth, g.render.final_transmittance, cfg.center_depth);
    m.loss_center_depth = g.center_depth.loss;
    for (double& v : g.center_depth.d_depth.data) v *= cfg.weights.center_depth;
    for (double& v : g.center_depth.d_final_transmittance.data) v *= cfg.weights.center_depth;
  }
  return g;
}

StepMetrics train_step(VoxelGrid& grid, OptimizerState& optimizer, const StepContext& ctx, uint64_t iteration) {
  const StepGradients g = compute_step_gradients(grid, ctx, iteration);
  const FieldGradients grads = render_backward(grid, g.camera.pose, g.render_options, g.total());
  adam_step(grid, grads, optimizer);
  return g.metrics;
}

std::string metrics_json(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["iter"] = m.iteration;
  j["loss_sds"] = m.loss_sds;
  j["loss_sketch"] = m.loss_sketch;
  j["loss_emptiness"] = m.loss_emptiness;
  j["loss_center_depth"] = m.loss_center_depth;
  j["t"] = m.timestep;
  j["lambda"] = m.lambda;
  if (m.psnr_probe) j["psnr_probe"] = *m.psnr_probe;
  return j.dump();
}

Trainer::Trainer(VoxelGrid grid, TrainConfig config, NoiseSchedule schedule)
    : grid_(std::move(grid)), config_(std::move(config)), schedule_(std::move(schedule)) {
  config_.validate();
  optimizer_ = OptimizerState(grid_, config_.adam);
}

Trainer::Trainer(VoxelGrid grid, OptimizerState optimizer, uint64_t start_iteration, TrainConfig config,
                 NoiseSchedule schedule)
    : grid_(std::move(grid)),
      optimizer_(std::move(optimizer)),
      iteration_(start_iteration),
      config_(std::move(config)),
      schedule_(std::move(schedule)) {
  config_.validate();
  if (!optimizer_.matches(grid_)) throw InputError("optimizer state does not match grid");
}

void Trainer::set_probe(Image target, int every) {
  probe_target_ = std::move(target);
  probe_every_ = std::max(every, 1);
}

RenderOptions Trainer::probe_render_options() const {
  RenderOptions opt;
  opt.n_samples = config_.n_samples;
  opt.stratified = false;
  opt.white_background = config_.white_background;
  opt.workers = config_.workers;
  return opt;
}

Image Trainer::render_probe() const { return render(grid_, sketch_view_pose(config_), probe_render_options()).rgb; }

StepMetrics Trainer::step() {
  if (!guidance_) throw ConfigError("trainer has no guidance provider");
  const StepContext ctx{config_, schedule_, *guidance_, sketch_provider_, sketch_};
  ++iteration_;
  StepMetrics m = train_step(grid_, optimizer_, ctx, iteration_);
  if (probe_target_ && iteration_ % static_cast<uint64_t>(probe_every_) == 0)
    m.psnr_probe = psnr(render_probe(), *probe_target_);
  return m;
}

void Trainer::run_until(uint64_t last, const std::function<void(const StepMetrics&)>& on_step) {
  while (iteration_ < last) {
    const StepMetrics m = step();
    if (on_step) on_step(m);
  }
}

}  // namespace sketchforge
