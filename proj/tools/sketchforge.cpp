#include <fmt/format.h>

#include <iostream>

#include "CLI11.hpp"
#include "sketchforge/commands.hpp"

using namespace sketchforge;

namespace {

void add_config_options(CLI::App* cmd, ConfigSources& sources, std::string& config_path) {
  cmd->add_option("-c,--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", sources.overrides, "override a config key (key=value), repeatable");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketchforge: sketch-guided text-to-3D voxel radiance fields"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenerateOptions gen;
  std::string gen_config, gen_out = "run";
  std::string prompt, sketch, provider;
  uint64_t seed = 0;
  int iterations = 0;
  auto* g = app.add_subcommand("generate", "optimize a voxel field from a prompt and a sketch");
  add_config_options(g, gen.config, gen_config);
  auto* o_prompt = g->add_option("--prompt", prompt, "text prompt");
  auto* o_sketch = g->add_option("--sketch", sketch, "input sketch PNG");
  auto* o_provider = g->add_option("--provider", provider, "guidance provider: dirac | remote");
  auto* o_seed = g->add_option("--seed", seed, "run seed");
  auto* o_iters = g->add_option("--iterations", iterations, "optimization steps");
  g->add_option("-o,--out", gen_out, "run directory");

  TurntableCommandOptions tt;
  std::string tt_config, tt_checkpoint, tt_out = "turntable";
  double tt_elevation = 0.0;
  auto* t = app.add_subcommand("turntable", "render RGB and depth frames around a checkpoint");
  add_config_options(t, tt.config, tt_config);
  t->add_option("checkpoint", tt_checkpoint, "checkpoint file")->required();
  t->add_option("-n,--frames", tt.frames, "number of frames")->capture_default_str();
  auto* o_elev = t->add_option("--elevation", tt_elevation, "camera elevation in degrees (default: sketch.elevation_deg)");
  t->add_option("--azimuth-offset", tt.azimuth_offset_deg, "azimuth of the first frame in degrees");
  t->add_option("-o,--out", tt_out, "output directory");

  EvalSketchOptions ev;
  std::string ev_config, ev_checkpoint, ev_sketch, ev_out;
  auto* e = app.add_subcommand("eval-sketch", "score sketch consistency of a checkpoint over N views");
  add_config_options(e, ev.config, ev_config);
  e->add_option("checkpoint", ev_checkpoint, "checkpoint file")->required();
  e->add_option("--sketch", ev_sketch, "input sketch PNG")->required();
  e->add_option("--views", ev.views, "number of azimuths")->capture_default_str();
  auto* o_report = e->add_option("-o,--out", ev_out, "report path (default: print)");

  ConfigSources health_sources;
  std::string health_config;
  auto* h = app.add_subcommand("health", "ping the guidance service");
  add_config_options(h, health_sources, health_config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (g->parsed()) {
      if (!gen_config.empty()) gen.config.file = gen_config;
      if (*o_prompt) gen.prompt = prompt;
      if (*o_sketch) gen.sketch = sketch;
      if (*o_provider) gen.provider = provider;
      if (*o_seed) gen.seed = seed;
      if (*o_iters) gen.iterations = iterations;
      gen.out = gen_out;
      cmd_generate(gen, std::cout);
    } else if (t->parsed()) {
      if (!tt_config.empty()) tt.config.file = tt_config;
      tt.checkpoint = tt_checkpoint;
      if (*o_elev) tt.elevation_deg = tt_elevation;
      tt.out = tt_out;
      cmd_turntable(tt, std::cout);
    } else if (e->parsed()) {
      if (!ev_config.empty()) ev.config.file = ev_config;
      ev.checkpoint = ev_checkpoint;
      ev.sketch = ev_sketch;
      if (*o_report) ev.out = ev_out;
      cmd_eval_sketch(ev, std::cout);
    } else if (h->parsed()) {
      if (!health_config.empty()) health_sources.file = health_config;
      cmd_health(health_sources, std::cout);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return exit_code_for(ex);
  }
  return kExitOk;
}
