#include "sketchforge/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sketchforge/errors.hpp"

namespace sketchforge {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const KeySpec* find_spec(const std::string& key) {
  for (const KeySpec& s : config_schema())
    if (s.key == key) return &s;
  return nullptr;
}

std::string format_value(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>)
          return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>)
          return x;
        else
          return fmt::format("{}", x);
      },
      v);
}

}  // namespace

const std::vector<KeySpec>& config_schema() {
  using VT = ValueType;
  static const std::vector<KeySpec> schema = {
      {"prompt", VT::text, std::string(), "text prompt"},
      {"sketch.path", VT::text, std::string(), "input sketch PNG"},
      {"sketch.azimuth_deg", VT::real, 0.0, "azimuth of the view the sketch was drawn from"},
      {"sketch.elevation_deg", VT::real, 15.0, "elevation of the sketch view"},
      {"run.iterations", VT::integer, int64_t{10000}, "optimization steps"},
      {"run.seed", VT::integer, int64_t{0}, "seed for cameras, noise and sampling"},
      {"run.workers", VT::integer, int64_t{0}, "render threads, 0 = hardware concurrency"},
      {"run.checkpoint_every", VT::integer, int64_t{1000}, "checkpoint period in iterations, 0 = final only"},
      {"run.probe_every", VT::integer, int64_t{100}, "PSNR probe period when a Dirac target exists, 0 = off"},
      {"run.turntable_frames", VT::integer, int64_t{8}, "frames rendered after training"},
      {"guidance.provider", VT::text, std::string("dirac"), "dirac | remote"},
      {"guidance.scale", VT::real, 100.0, "classifier-free guidance scale s"},
      {"guidance.lambda_tolerance_deg", VT::real, 15.0, "azimuth tolerance for lambda = 1"},
      {"guidance.clamp_timesteps", VT::boolean, true, "sample t in [0.02T, 0.98T] instead of [1, T]"},
      {"dirac.target", VT::text, std::string("toy"), "toy (built-in scene) or a target PNG"},
      {"dirac.scene_resolution", VT::integer, int64_t{48}, "grid resolution of the built-in scene"},
      {"dirac.samples", VT::integer, int64_t{256}, "samples per ray for target renders"},
      {"sketch_loss.provider", VT::text, std::string("local"), "local | remote"},
      {"sketch_loss.weight", VT::real, 1.0, "weight of the sketch-consistency loss"},
      {"sketch_loss.every_n", VT::integer, int64_t{1}, "apply the sketch loss every n-th iteration"},
      {"loss.sds", VT::real, 1.0, "weight of the score distillation term"},
      {"loss.emptiness", VT::real, 1e-2, "weight of the emptiness regularizer"},
      {"loss.emptiness_beta", VT::real, 10.0, "emptiness sharpness"},
      {"loss.center_depth", VT::real, 1e-1, "weight of the center-depth regularizer"},
      {"loss.center_depth_margin", VT::real, 0.1, "center-depth margin"},
      {"schedule.steps", VT::integer, int64_t{1000}, "diffusion steps T"},
      {"schedule.beta_start", VT::real, 1e-4, "first beta"},
      {"schedule.beta_end", VT::real, 2e-2, "last beta"},
      {"schedule.weighting", VT::text, std::string("one_minus_alpha_bar"), "constant | one_minus_alpha_bar"},
      {"render.width", VT::integer, int64_t{64}, "render width"},
      {"render.height", VT::integer, int64_t{64}, "render height"},
      {"render.n_samples", VT::integer, int64_t{64}, "samples per ray"},
      {"render.stratified", VT::boolean, true, "jitter samples during training"},
      {"render.white_background", VT::boolean, false, "composite onto white"},
      {"camera.radius_min", VT::real, 3.0, "orbit radius lower bound"},
      {"camera.radius_max", VT::real, 3.0, "orbit radius upper bound"},
      {"camera.elevation_min_deg", VT::real, 0.0, "elevation lower bound"},
      {"camera.elevation_max_deg", VT::real, 30.0, "elevation upper bound"},
      {"camera.azimuth_count", VT::integer, int64_t{0}, "0 = continuous azimuth, k = k fixed azimuths"},
      {"camera.fov_deg", VT::real, 40.0, "vertical field of view"},
      {"grid.resolution", VT::integer, int64_t{64}, "vertices per axis"},
      {"grid.density_activation", VT::text, std::string("softplus"), "softplus | relu | exp"},
      {"grid.initial_density", VT::real, 0.1, "initial activated density"},
      {"optim.lr_density", VT::real, 5e-2, "Adam learning rate for density logits"},
      {"optim.lr_color", VT::real, 2e-2, "Adam learning rate for color features"},
      {"optim.beta1", VT::real, 0.9, "Adam beta1"},
      {"optim.beta2", VT::real, 0.99, "Adam beta2"},
      {"optim.epsilon", VT::real, 1e-8, "Adam epsilon"},
      {"service.base_url", VT::text, std::string("http://127.0.0.1:8765"), "guidance service URL"},
      {"service.timeout", VT::real, 120.0, "request timeout in seconds"},
      {"service.max_retries", VT::integer, int64_t{3}, "retries on timeouts and 5xx"},
      {"service.backoff", VT::real, 0.5, "initial retry backoff in seconds"},
  };
  return schema;
}

Settings::Settings() {
  for (const KeySpec& s : config_schema()) values_[s.key] = s.default_value;
}

void Settings::set(const std::string& key, const std::string& raw) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError(fmt::format("unknown config key '{}'", key));
  const std::string text = trim(raw);
  auto bad = [&] { return ConfigError(fmt::format("config key '{}' expects {}, got '{}'", key,
                                                  spec->type == ValueType::integer  ? "an integer"
                                                  : spec->type == ValueType::real   ? "a number"
                                                  : spec->type == ValueType::boolean ? "true or false"
                                                                                     : "text",
                                                  text)); };
  switch (spec->type) {
    case ValueType::integer: {
      int64_t v = 0;
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || end != text.data() + text.size() || text.empty()) throw bad();
      values_[key] = v;
      break;
    }
    case ValueType::real: {
      double v = 0.0;
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || end != text.data() + text.size() || text.empty() || !std::isfinite(v)) throw bad();
      values_[key] = v;
      break;
    }
    case ValueType::boolean:
      if (text == "true" || text == "1" || text == "yes")
        values_[key] = true;
      else if (text == "false" || text == "0" || text == "no")
        values_[key] = false;
      else
        throw bad();
      break;
    case ValueType::text:
      values_[key] = text;
      break;
  }
}

void Settings::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(fmt::format("expected key=value, got '{}'", assignment));
  set(trim(std::string_view(assignment).substr(0, eq)), assignment.substr(eq + 1));
}

void Settings::merge_text(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, number));
    try {
      set(trim(std::string_view(line).substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, number, e.what()));
    }
  }
}

void Settings::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  merge_text(s.str(), path.string());
}

const Value& Settings::get(const std::string& key, ValueType type) const {
  const KeySpec* spec = find_spec(key);
  if (!spec || spec->type != type) throw std::logic_error(fmt::format("config key '{}' read with the wrong type", key));
  return values_.at(key);
}

int64_t Settings::integer(const std::string& key) const { return std::get<int64_t>(get(key, ValueType::integer)); }
double Settings::real(const std::string& key) const { return std::get<double>(get(key, ValueType::real)); }
bool Settings::boolean(const std::string& key) const { return std::get<bool>(get(key, ValueType::boolean)); }
const std::string& Settings::text(const std::string& key) const {
  return std::get<std::string>(get(key, ValueType::text));
}

std::string Settings::dump() const {
  std::string out;
  for (const KeySpec& s : config_schema()) out += fmt::format("{} = {}\n", s.key, format_value(values_.at(s.key)));
  return out;
}

nlohmann::ordered_json Settings::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const KeySpec& s : config_schema())
    std::visit([&](const auto& v) { j[s.key] = v; }, values_.at(s.key));
  return j;
}

NoiseSchedule RunConfig::schedule() const {
  return NoiseSchedule::linear(schedule_steps, beta_start, beta_end, weighting);
}

VoxelGrid RunConfig::initial_grid() const {
  return VoxelGrid({grid_resolution, grid_resolution, grid_resolution}, Bounds{}, density_activation, initial_density);
}

RenderOptions RunConfig::view_render_options() const {
  RenderOptions opt;
  opt.n_samples = train.n_samples;
  opt.stratified = false;
  opt.white_background = train.white_background;
  opt.workers = train.workers;
  return opt;
}

TurntableOptions RunConfig::turntable(int frames, double elevation) const {
  TurntableOptions t;
  t.frames = frames;
  t.elevation = elevation;
  t.radius = 0.5 * (train.camera.radius_min + train.camera.radius_max);
  t.fov_y = train.camera.fov_y;
  t.width = train.width;
  t.height = train.height;
  t.render = view_render_options();
  return t;
}

RunConfig resolve(const Settings& s) {
  auto to_int = [&](const std::string& key, int64_t lo, int64_t hi) {
    const int64_t v = s.integer(key);
    if (v < lo || v > hi) throw ConfigError(fmt::format("config key '{}' must lie in [{}, {}] (got {})", key, lo, hi, v));
    return static_cast<int>(v);
  };
  auto choice = [&](const std::string& key, std::initializer_list<const char*> options) {
    const std::string& v = s.text(key);
    for (const char* o : options)
      if (v == o) return v;
    std::string list;
    for (const char* o : options) list += (list.empty() ? "" : " | ") + std::string(o);
    throw ConfigError(fmt::format("config key '{}' must be one of {} (got '{}')", key, list, v));
  };

  RunConfig rc;
  TrainConfig& t = rc.train;
  t.iterations = to_int("run.iterations", 1, 100000000);
  t.seed = static_cast<uint64_t>(s.integer("run.seed"));
  t.workers = static_cast<unsigned>(to_int("run.workers", 0, 1024));
  t.width = to_int("render.width", 1, 4096);
  t.height = to_int("render.height", 1, 4096);
  t.n_samples = to_int("render.n_samples", 2, 65536);
  t.stratified = s.boolean("render.stratified");
  t.white_background = s.boolean("render.white_background");
  t.camera.radius_min = s.real("camera.radius_min");
  t.camera.radius_max = s.real("camera.radius_max");
  t.camera.elevation_min = s.real("camera.elevation_min_deg") * kDeg;
  t.camera.elevation_max = s.real("camera.elevation_max_deg") * kDeg;
  t.camera.azimuth_count = to_int("camera.azimuth_count", 0, 1000000);
  t.camera.fov_y = s.real("camera.fov_deg") * kDeg;
  if (!(t.camera.fov_y > 0.0 && t.camera.fov_y < std::numbers::pi)) throw ConfigError("camera.fov_deg must lie in (0, 180)");
  t.prompt = s.text("prompt");
  t.sketch_azimuth = s.real("sketch.azimuth_deg") * kDeg;
  t.sketch_elevation = s.real("sketch.elevation_deg") * kDeg;
  t.lambda_tolerance = s.real("guidance.lambda_tolerance_deg") * kDeg;
  t.guidance_scale = s.real("guidance.scale");
  t.clamp_timesteps = s.boolean("guidance.clamp_timesteps");
  t.sketch_every_n = to_int("sketch_loss.every_n", 1, 1000000);
  t.weights.sds = s.real("loss.sds");
  t.weights.sketch = s.real("sketch_loss.weight");
  t.weights.emptiness = s.real("loss.emptiness");
  t.weights.center_depth = s.real("loss.center_depth");
  t.emptiness_beta = s.real("loss.emptiness_beta");
  t.center_depth.margin = s.real("loss.center_depth_margin");
  t.adam.lr_density = s.real("optim.lr_density");
  t.adam.lr_color = s.real("optim.lr_color");
  t.adam.beta1 = s.real("optim.beta1");
  t.adam.beta2 = s.real("optim.beta2");
  t.adam.epsilon = s.real("optim.epsilon");
  if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0 && t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0))
    throw ConfigError("optim.beta1 and optim.beta2 must lie in [0, 1)");
  if (!(t.adam.epsilon > 0.0)) throw ConfigError("optim.epsilon must be > 0");
  if (!(t.emptiness_beta > 0.0)) throw ConfigError("loss.emptiness_beta must be > 0");
  t.validate();

  rc.service.base_url = s.text("service.base_url");
  rc.service.timeout = s.real("service.timeout");
  rc.service.max_retries = to_int("service.max_retries", 0, 100);
  rc.service.backoff = s.real("service.backoff");
  rc.service.validate();

  rc.guidance_provider = choice("guidance.provider", {"dirac", "remote"});
  rc.sketch_loss_provider = choice("sketch_loss.provider", {"local", "remote"});
  rc.dirac_target = s.text("dirac.target");
  if (rc.dirac_target.empty()) throw ConfigError("dirac.target must be 'toy' or a PNG path");
  rc.dirac_scene_resolution = to_int("dirac.scene_resolution", 2, 512);
  rc.dirac_samples = to_int("dirac.samples", 2, 65536);
  rc.sketch_path = s.text("sketch.path");

  rc.grid_resolution = to_int("grid.resolution", 2, 1024);
  const std::string& act = choice("grid.density_activation", {"softplus", "relu", "exp"});
  rc.density_activation = act == "softplus" ? DensityActivation::softplus
                          : act == "relu"   ? DensityActivation::relu
                                            : DensityActivation::exp;
  rc.initial_density = s.real("grid.initial_density");
  if (!(rc.initial_density > 0.0)) throw ConfigError("grid.initial_density must be > 0");

  rc.schedule_steps = to_int("schedule.steps", 2, 1000000);
  rc.beta_start = s.real("schedule.beta_start");
  rc.beta_end = s.real("schedule.beta_end");
  try {
    rc.weighting = parse_weighting(s.text("schedule.weighting"));
    (void)rc.schedule();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }

  rc.checkpoint_every = to_int("run.checkpoint_every", 0, 100000000);
  rc.probe_every = to_int("run.probe_every", 0, 100000000);
  rc.turntable_frames = to_int("run.turntable_frames", 0, 100000);
  return rc;
}

}  // namespace sketchforge
