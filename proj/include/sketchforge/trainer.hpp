#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>

#include "sketchforge/adam.hpp"
#include "sketchforge/field.hpp"
#include "sketchforge/guidance.hpp"
#include "sketchforge/regularizers.hpp"
#include "sketchforge/render.hpp"
#include "sketchforge/schedule.hpp"
#include "sketchforge/sketch.hpp"

namespace sketchforge {

struct CameraDistribution {
  double radius_min = 3.0;
  double radius_max = 3.0;
  double elevation_min = 0.0;                 // radians
  double elevation_max = 0.5235987755982988;  // 30 degrees
  int azimuth_count = 0;  // 0: continuous azimuth; k > 0: k evenly spaced azimuths
  double fov_y = 0.6981317007977318;
};

struct LossWeights {
  double sds = 1.0;
  double sketch = 1.0;  // unit weight on the sketch term of the total objective
  double emptiness = 1e-2;
  double center_depth = 1e-1;
};

struct TrainConfig {
  int iterations = 10000;
  int width = 64;
  int height = 64;
  int n_samples = 64;
  bool stratified = true;
  bool white_background = false;
  CameraDistribution camera;

  std::string prompt;
  double sketch_azimuth = 0.0;                  // radians
  double sketch_elevation = 0.2617993877991494;  // 15 degrees
  double lambda_tolerance = 0.2617993877991494;  // 15 degrees
  double guidance_scale = 100.0;
  bool clamp_timesteps = true;
  int sketch_every_n = 1;

  LossWeights weights;
  double emptiness_beta = 10.0;
  CenterDepthParams center_depth;
  AdamParams adam;

  uint64_t seed = 0;
  unsigned workers = 0;

  void validate() const;
};

struct CameraSample {
  CameraPose pose;
  double azimuth = 0.0;
  double elevation = 0.0;
  double radius = 0.0;
};

CameraSample sample_camera(const TrainConfig& config, std::mt19937_64& rng);

// Camera at the registered sketch viewpoint with the configured image size.
CameraPose sketch_view_pose(const TrainConfig& config);

struct StepMetrics {
  uint64_t iteration = 0;
  double loss_sds = 0.0;
  double loss_sketch = 0.0;
  double loss_emptiness = 0.0;
  double loss_center_depth = 0.0;
  int timestep = 0;
  double lambda = 0.0;
  double azimuth = 0.0;
  std::optional<double> psnr_probe;
};

// Everything a step needs besides the parameters.
struct StepContext {
  const TrainConfig& config;
  const NoiseSchedule& schedule;
  GuidanceProvider& guidance;
  SketchLossProvider* sketch_provider = nullptr;
  const SketchImage* sketch = nullptr;
};

// Per-component image-space gradients of one step, before render_backward.
struct StepGradients {
  CameraSample camera;
  RenderOptions render_options;
  RenderOutput render;
  Image sds;     // weighted SDS image gradient
  Image sketch;  // weighted sketch-loss image gradient
  EmptinessResult emptiness;      // weighted
  CenterDepthResult center_depth;  // weighted
  StepMetrics metrics;

  // Sum of all components as a render upstream.
  RenderUpstream total() const;
};

// Deterministic per-iteration generator derived from (seed, iteration).
std::mt19937_64 step_rng(uint64_t seed, uint64_t iteration);

StepGradients compute_step_gradients(const VoxelGrid& grid, const StepContext& ctx, uint64_t iteration);

// One optimization step: sample camera, render, conditioned SDS with
// classifier-free guidance, sketch-consistency and regularizer gradients,
// backward through the renderer, Adam update.
StepMetrics train_step(VoxelGrid& grid, OptimizerState& optimizer, const StepContext& ctx, uint64_t iteration);

// One line of metrics.jsonl.
std::string metrics_json(const StepMetrics& m);

// Drives train_step and owns the optimization state.
class Trainer {
 public:
  Trainer(VoxelGrid grid, TrainConfig config, NoiseSchedule schedule);
  // Resumes from a checkpointed grid and optimizer at `start_iteration`.
  Trainer(VoxelGrid grid, OptimizerState optimizer, uint64_t start_iteration, TrainConfig config,
          NoiseSchedule schedule);

  void set_guidance(GuidanceProvider* provider) { guidance_ = provider; }
  void set_sketch(SketchLossProvider* provider, const SketchImage* sketch) {
    sketch_provider_ = provider;
    sketch_ = sketch;
  }
  // Target compared against the sketch-view render every `every` iterations.
  void set_probe(Image target, int every);

  StepMetrics step();
  // Runs until `iteration() == last`, invoking `on_step` after each step.
  void run_until(uint64_t last, const std::function<void(const StepMetrics&)>& on_step = {});

  uint64_t iteration() const { return iteration_; }
  const VoxelGrid& grid() const { return grid_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  const TrainConfig& config() const { return config_; }
  RenderOptions probe_render_options() const;
  Image render_probe() const;

 private:
  VoxelGrid grid_;
  OptimizerState optimizer_;
  uint64_t iteration_ = 0;
  TrainConfig config_;
  NoiseSchedule schedule_;
  GuidanceProvider* guidance_ = nullptr;
  SketchLossProvider* sketch_provider_ = nullptr;
  const SketchImage* sketch_ = nullptr;
  std::optional<Image> probe_target_;
  int probe_every_ = 0;
};

}  // namespace sketchforge
