#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sketchforge/config.hpp"

namespace sketchforge {

constexpr const char* kVersion = "0.1.0";

// Process exit codes.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;
constexpr int kExitCorrupt = 4;

// Maps an in-flight exception to an exit code.
int exit_code_for(const std::exception& e);

// Config file, then SKETCHFORGE_SERVICE_URL, then `key=value` overrides.
struct ConfigSources {
  std::optional<std::filesystem::path> file;
  std::vector<std::string> overrides;
};
Settings load_settings(const ConfigSources& sources);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct GenerateOptions {
  ConfigSources config;
  std::optional<std::string> prompt;
  std::optional<std::string> sketch;
  std::optional<std::string> provider;
  std::optional<uint64_t> seed;
  std::optional<int> iterations;
  std::filesystem::path out = "run";
};

// Writes manifest.json, config.txt, metrics.jsonl, checkpoints/ckpt_%06d.skfg,
// checkpoint.skfg and turntable/ into `out`.
void cmd_generate(const GenerateOptions& options, std::ostream& log);

struct TurntableCommandOptions {
  ConfigSources config;
  std::filesystem::path checkpoint;
  int frames = 8;
  std::optional<double> elevation_deg;  // defaults to sketch.elevation_deg
  double azimuth_offset_deg = 0.0;
  std::filesystem::path out = "turntable";
};

std::vector<std::filesystem::path> cmd_turntable(const TurntableCommandOptions& options, std::ostream& log);

struct EvalSketchOptions {
  ConfigSources config;
  std::filesystem::path checkpoint;
  std::filesystem::path sketch;
  int views = 8;
  std::optional<std::filesystem::path> out;  // report path; printed to the log when absent
};

// Report: {"per_view": [loss...], "azimuths_deg": [...], "mean", "std", ...}.
nlohmann::ordered_json cmd_eval_sketch(const EvalSketchOptions& options, std::ostream& log);

nlohmann::json cmd_health(const ConfigSources& config, std::ostream& log);

}  // namespace sketchforge
