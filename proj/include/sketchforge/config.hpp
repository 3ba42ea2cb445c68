#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "sketchforge/field.hpp"
#include "sketchforge/render.hpp"
#include "sketchforge/schedule.hpp"
#include "sketchforge/service_client.hpp"
#include "sketchforge/trainer.hpp"

namespace sketchforge {

// Flat typed key-value configuration. File syntax: one `key = value` per
// line, `#` starts a comment. Angles are given in degrees (keys ending _deg).
enum class ValueType { integer, real, boolean, text };
using Value = std::variant<int64_t, double, bool, std::string>;

struct KeySpec {
  std::string key;
  ValueType type;
  Value default_value;
  std::string help;
};

const std::vector<KeySpec>& config_schema();

class Settings {
 public:
  Settings();

  // Parses `text` as the key's declared type. Throws ConfigError on unknown
  // keys and malformed values.
  void set(const std::string& key, const std::string& text);
  // Accepts `key=value`.
  void set_assignment(const std::string& assignment);
  void merge_text(std::string_view text, const std::string& origin);
  void merge_file(const std::filesystem::path& path);

  int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  const std::string& text(const std::string& key) const;

  // Resolved configuration in the file syntax, schema order.
  std::string dump() const;
  nlohmann::ordered_json to_json() const;

 private:
  const Value& get(const std::string& key, ValueType type) const;
  std::map<std::string, Value> values_;
};

// Typed view of a validated Settings.
struct RunConfig {
  TrainConfig train;
  ServiceConfig service;

  std::string guidance_provider;     // dirac | remote
  std::string sketch_loss_provider;  // local | remote
  std::string dirac_target;          // "toy" or a PNG path
  int dirac_scene_resolution = 48;
  int dirac_samples = 256;
  std::string sketch_path;

  int grid_resolution = 64;
  DensityActivation density_activation = DensityActivation::softplus;
  double initial_density = 0.1;

  int schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  TimestepWeighting weighting = TimestepWeighting::one_minus_alpha_bar;

  int checkpoint_every = 1000;
  int probe_every = 100;
  int turntable_frames = 8;

  NoiseSchedule schedule() const;
  VoxelGrid initial_grid() const;
  // Render settings shared by probes, turntables and sketch evaluation.
  RenderOptions view_render_options() const;
  TurntableOptions turntable(int frames, double elevation) const;
};

// Throws ConfigError when values are out of range.
RunConfig resolve(const Settings& settings);

}  // namespace sketchforge
