#include "sketchforge/commands.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "sketchforge/checkpoint.hpp"
#include "sketchforge/errors.hpp"
#include "sketchforge/guidance.hpp"
#include "sketchforge/png_io.hpp"
#include "sketchforge/scene.hpp"
#include "sketchforge/service_client.hpp"
#include "sketchforge/sketch.hpp"

namespace sketchforge {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Providers {
  std::unique_ptr<ServiceClient> client;
  std::unique_ptr<GuidanceProvider> guidance;
  std::unique_ptr<SketchLossProvider> sketch_loss;
  std::optional<Image> probe_target;  // reference image at the sketch view
};

ServiceClient& client_for(Providers& p, const RunConfig& rc) {
  if (!p.client) p.client = std::make_unique<ServiceClient>(rc.service);
  return *p.client;
}

std::unique_ptr<SketchLossProvider> make_sketch_loss_provider(Providers& p, const RunConfig& rc) {
  if (rc.sketch_loss_provider == "remote") return std::make_unique<RemoteSketchLossProvider>(client_for(p, rc));
  return std::make_unique<LocalSketchLossProvider>();
}

Providers make_providers(const RunConfig& rc, const NoiseSchedule& schedule) {
  Providers p;
  if (rc.guidance_provider == "remote") {
    p.guidance = std::make_unique<RemoteGuidanceProvider>(client_for(p, rc));
  } else if (rc.dirac_target == "toy") {
    RenderOptions opt;
    opt.n_samples = rc.dirac_samples;
    opt.white_background = rc.train.white_background;
    opt.workers = rc.train.workers;
    auto scene = std::make_unique<SceneDiracProvider>(make_toy_scene(rc.dirac_scene_resolution), schedule, opt);
    p.probe_target = scene->target_for(sketch_view_pose(rc.train));
    p.guidance = std::move(scene);
  } else {
    Image target;
    try {
      target = read_png_rgb(rc.dirac_target);
    } catch (const LoadError& e) {
      throw ConfigError(fmt::format("dirac.target: {}", e.what()));
    }
    target = resize_bilinear(target, rc.train.height, rc.train.width);
    p.probe_target = target;
    p.guidance = std::make_unique<DiracProvider>(to_guidance_domain(target), schedule);
  }
  p.sketch_loss = make_sketch_loss_provider(p, rc);
  return p;
}

LoadedSketch load_sketch_input(const std::filesystem::path& path) {
  try {
    return load_sketch_png(path);
  } catch (const LoadError& e) {
    throw ConfigError(fmt::format("cannot use sketch: {}", e.what()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

std::string read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InputError*>(&e)) return kExitConfig;
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProtocolError*>(&e)) return kExitTransport;
  if (dynamic_cast<const LoadError*>(&e)) return kExitCorrupt;
  return kExitFailure;
}

Settings load_settings(const ConfigSources& sources) {
  Settings s;
  if (sources.file) s.merge_file(*sources.file);
  if (const char* url = std::getenv("SKETCHFORGE_SERVICE_URL"); url && *url) s.set("service.base_url", url);
  for (const std::string& o : sources.overrides) s.set_assignment(o);
  return s;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_binary(path)); }

void cmd_generate(const GenerateOptions& o, std::ostream& log) {
  Settings settings = load_settings(o.config);
  if (o.prompt) settings.set("prompt", *o.prompt);
  if (o.sketch) settings.set("sketch.path", *o.sketch);
  if (o.provider) settings.set("guidance.provider", *o.provider);
  if (o.seed) settings.set("run.seed", std::to_string(*o.seed));
  if (o.iterations) settings.set("run.iterations", std::to_string(*o.iterations));
  const RunConfig rc = resolve(settings);
  if (rc.sketch_path.empty())
    throw ConfigError("generate needs an input sketch: pass --sketch <file.png> or set sketch.path in the config");
  const LoadedSketch sketch = load_sketch_input(rc.sketch_path);
  const NoiseSchedule schedule = rc.schedule();
  Providers providers = make_providers(rc, schedule);

  std::filesystem::create_directories(o.out / "checkpoints");
  write_text(o.out / "config.txt", settings.dump());

  nlohmann::ordered_json manifest;
  manifest["tool"] = "sketchforge";
  manifest["version"] = kVersion;
  manifest["command"] = "generate";
  manifest["prompt"] = rc.train.prompt;
  manifest["seeds"] = {{"run", rc.train.seed}, {"embedding_projection", kEmbedProjectionSeed}};
  manifest["sketch"] = {{"path", rc.sketch_path},
                        {"sha256", sha256_file(rc.sketch_path)},
                        {"polarity", to_string(sketch.polarity)},
                        {"height", sketch.sketch.strokes.height},
                        {"width", sketch.sketch.strokes.width}};
  manifest["providers"] = {{"guidance", providers.guidance->identity()},
                           {"sketch_loss", providers.sketch_loss->identity()}};
  manifest["config"] = settings.to_json();
  write_text(o.out / "manifest.json", manifest.dump(2) + "\n");

  Trainer trainer(rc.initial_grid(), rc.train, schedule);
  trainer.set_guidance(providers.guidance.get());
  trainer.set_sketch(providers.sketch_loss.get(), &sketch.sketch);
  if (providers.probe_target && rc.probe_every > 0) trainer.set_probe(*providers.probe_target, rc.probe_every);

  std::ofstream metrics(o.out / "metrics.jsonl", std::ios::binary);
  log << fmt::format("generate: {} iterations, guidance {}, sketch loss {}\n", rc.train.iterations,
                     providers.guidance->identity(), providers.sketch_loss->identity());
  const auto final_checkpoint = o.out / "checkpoint.skfg";
  try {
    trainer.run_until(static_cast<uint64_t>(rc.train.iterations), [&](const StepMetrics& m) {
      metrics << metrics_json(m) << '\n';
      metrics.flush();
      if (rc.checkpoint_every > 0 && m.iteration % static_cast<uint64_t>(rc.checkpoint_every) == 0)
        save_checkpoint(o.out / "checkpoints" / fmt::format("ckpt_{:06d}.skfg", m.iteration), trainer.grid(),
                        &trainer.optimizer(), m.iteration);
      if (m.psnr_probe) log << fmt::format("iter {:6d}  sds {:.5f}  psnr {:.2f} dB\n", m.iteration, m.loss_sds, *m.psnr_probe);
    });
  } catch (const TransportError&) {
    save_checkpoint(final_checkpoint, trainer.grid(), &trainer.optimizer(), trainer.iteration());
    log << fmt::format("service failure at iteration {}; state saved to {}\n", trainer.iteration() + 1,
                       final_checkpoint.string());
    throw;
  } catch (const ProtocolError&) {
    save_checkpoint(final_checkpoint, trainer.grid(), &trainer.optimizer(), trainer.iteration());
    throw;
  }
  save_checkpoint(final_checkpoint, trainer.grid(), &trainer.optimizer(), trainer.iteration());
  export_turntable(trainer.grid(), rc.turntable(rc.turntable_frames, rc.train.sketch_elevation), o.out / "turntable");
  log << fmt::format("done: {}\n", o.out.string());
}

std::vector<std::filesystem::path> cmd_turntable(const TurntableCommandOptions& o, std::ostream& log) {
  const RunConfig rc = resolve(load_settings(o.config));
  if (o.frames < 0) throw ConfigError("--frames must be >= 0");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  TurntableOptions opt = rc.turntable(o.frames, o.elevation_deg ? *o.elevation_deg * kDeg : rc.train.sketch_elevation);
  opt.azimuth_offset = o.azimuth_offset_deg * kDeg;
  const auto written = export_turntable(ck.grid, opt, o.out);
  log << fmt::format("wrote {} files to {}\n", written.size(), o.out.string());
  return written;
}

nlohmann::ordered_json cmd_eval_sketch(const EvalSketchOptions& o, std::ostream& log) {
  const RunConfig rc = resolve(load_settings(o.config));
  if (o.views < 0) throw ConfigError("--views must be >= 0");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const LoadedSketch sketch = load_sketch_input(o.sketch);
  Providers p;
  std::unique_ptr<SketchLossProvider> provider = make_sketch_loss_provider(p, rc);

  const TurntableOptions views = rc.turntable(o.views, rc.train.sketch_elevation);
  nlohmann::ordered_json report;
  report["per_view"] = nlohmann::json::array();
  report["azimuths_deg"] = nlohmann::json::array();
  double sum = 0.0, sum_sq = 0.0;
  for (int v = 0; v < o.views; ++v) {
    const CameraPose pose = turntable_pose(views, v);
    const double loss = sketch_loss(*provider, render(ck.grid, pose, views.render).rgb, sketch.sketch).loss;
    report["per_view"].push_back(loss);
    report["azimuths_deg"].push_back(360.0 * v / o.views);
    sum += loss;
    sum_sq += loss * loss;
  }
  if (o.views > 0) {
    const double mean = sum / o.views;
    report["mean"] = mean;
    report["std"] = std::sqrt(std::max(0.0, sum_sq / o.views - mean * mean));
  } else {
    report["mean"] = nullptr;
    report["std"] = nullptr;
  }
  report["views"] = o.views;
  report["provider"] = provider->identity();
  report["sketch_sha256"] = sha256_file(o.sketch);
  report["sketch_polarity"] = to_string(sketch.polarity);
  report["checkpoint_iteration"] = ck.iteration;
  if (o.out) {
    if (o.out->has_parent_path()) std::filesystem::create_directories(o.out->parent_path());
    write_text(*o.out, report.dump(2) + "\n");
    log << fmt::format("wrote {}\n", o.out->string());
  } else {
    log << report.dump(2) << '\n';
  }
  return report;
}

nlohmann::json cmd_health(const ConfigSources& config, std::ostream& log) {
  const RunConfig rc = resolve(load_settings(config));
  ServiceClient client(rc.service);
  const nlohmann::json reply = client.health();
  log << reply.dump() << '\n';
  return reply;
}

}  // namespace sketchforge
