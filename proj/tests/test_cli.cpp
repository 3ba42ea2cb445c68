#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "sketchforge/checkpoint.hpp"
#include "sketchforge/commands.hpp"
#include "sketchforge/errors.hpp"
#include "sketchforge/png_io.hpp"
#include "test_support.hpp"
// After Eigen: see test_service_client.cpp.
#include "httplib.h"

using namespace sketchforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("sketchforge_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Dark ellipse outline on white paper.
fs::path write_sketch(const fs::path& dir) {
  Image img(48, 48, 3);
  for (double& v : img.data) v = 1.0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) {
      const double r = std::hypot((x - 24.0) / 14.0, (y - 22.0) / 10.0);
      if (std::abs(r - 1.0) < 0.1)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.0;
    }
  const fs::path p = dir / "sketch.png";
  write_png(img, p);
  return p;
}

// Small, fast run settings.
std::vector<std::string> small_run() {
  return {"render.width=24", "render.height=24", "render.n_samples=24", "grid.resolution=20",
          "dirac.scene_resolution=24", "dirac.samples=64", "guidance.scale=0", "run.probe_every=10",
          "run.checkpoint_every=50", "run.turntable_frames=2"};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SKETCHFORGE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class HealthStub {
 public:
  explicit HealthStub(int denoise_status = 200) {
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
    server_.Post("/v1/denoise", [denoise_status](const httplib::Request& req, httplib::Response& res) {
      if (denoise_status != 200) {
        res.status = denoise_status;
        return;
      }
      const wire::Message in = wire::decode(req.body);
      const wire::Array& x = in.array("x_t");
      wire::Message out;
      out.arrays = {{"eps_cond", x.dims, std::vector<float>(x.values.size())},
                    {"eps_uncond", x.dims, std::vector<float>(x.values.size())}};
      res.set_content(wire::encode(out), "application/octet-stream");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~HealthStub() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("config files, overrides and validation") {
  TempDir dir("config");
  const fs::path file = dir.path / "run.cfg";
  std::ofstream(file) << "# comment\nprompt = a red chair  # trailing\nrun.iterations = 12\nrender.stratified = false\n";
  Settings s = load_settings({file, {"run.iterations=7"}});
  CHECK(s.text("prompt") == "a red chair");
  CHECK(s.integer("run.iterations") == 7);
  CHECK(!s.boolean("render.stratified"));
  const RunConfig rc = resolve(s);
  CHECK(rc.train.iterations == 7);
  CHECK(rc.train.guidance_scale == 100.0);
  CHECK(rc.train.weights.sketch == 1.0);
  CHECK(rc.guidance_provider == "dirac");

  Settings round;
  round.merge_text(s.dump(), "dump");
  CHECK(round.dump() == s.dump());

  CHECK_THROWS_AS(s.set("no.such.key", "1"), ConfigError);
  CHECK_THROWS_AS(s.set("run.iterations", "ten"), ConfigError);
  CHECK_THROWS_AS(s.set("run.iterations", "1.5"), ConfigError);
  CHECK_THROWS_AS(s.set("guidance.scale", "inf"), ConfigError);
  CHECK_THROWS_AS(s.set("render.stratified", "maybe"), ConfigError);
  CHECK_THROWS_AS(s.set_assignment("prompt"), ConfigError);
  CHECK_THROWS_AS(s.merge_text("just words\n", "inline"), ConfigError);
  CHECK_THROWS_AS(load_settings({dir.path / "missing.cfg", {}}), ConfigError);
  Settings bad;
  bad.set("guidance.provider", "oracle");
  CHECK_THROWS_AS(resolve(bad), ConfigError);
  bad = Settings();
  bad.set("run.iterations", "0");
  CHECK_THROWS_AS(resolve(bad), ConfigError);
  bad = Settings();
  bad.set("schedule.beta_end", "1.5");
  CHECK_THROWS_AS(resolve(bad), ConfigError);
}

TEST_CASE("service URL environment override") {
  ::setenv("SKETCHFORGE_SERVICE_URL", "http://example.invalid:9", 1);
  CHECK(load_settings({}).text("service.base_url") == "http://example.invalid:9");
  CHECK(load_settings({std::nullopt, {"service.base_url=http://x:1"}}).text("service.base_url") == "http://x:1");
  ::unsetenv("SKETCHFORGE_SERVICE_URL");
  CHECK(load_settings({}).text("service.base_url") == "http://127.0.0.1:8765");
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(InputError("x")) == 2);
  CHECK(exit_code_for(TransportError("x")) == 3);
  CHECK(exit_code_for(ProtocolError("x")) == 3);
  CHECK(exit_code_for(LoadError("x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("generate with the bundled Dirac scene") {
  TempDir dir("generate");
  const fs::path sketch = write_sketch(dir.path);
  std::string args = "generate --prompt 'a ball on a table' --sketch " + sketch.string() + " --iterations 200 -o " +
                     (dir.path / "run").string();
  for (const std::string& o : small_run()) args += " --set " + o;
  REQUIRE(run_cli(args, dir.path / "log.txt") == 0);

  const fs::path run = dir.path / "run";
  for (const char* f : {"manifest.json", "config.txt", "metrics.jsonl", "checkpoint.skfg", "checkpoints/ckpt_000200.skfg",
                        "turntable/frame_0001.png", "turntable/depth_0001.png"})
    CHECK(fs::exists(run / f));

  const auto manifest = nlohmann::json::parse(slurp(run / "manifest.json"));
  CHECK(manifest["sketch"]["sha256"] == sha256_hex(slurp(sketch)));
  CHECK(manifest["sketch"]["polarity"] == "dark_on_light");
  CHECK(manifest["seeds"]["run"] == 0);
  CHECK(manifest["providers"]["guidance"] == "dirac-scene");
  CHECK(manifest["providers"]["sketch_loss"] == "local-dog-proj512");
  CHECK(manifest["version"] == kVersion);
  CHECK(manifest["config"]["run.iterations"] == 200);

  std::vector<double> sds;
  std::istringstream lines(slurp(run / "metrics.jsonl"));
  std::string line;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["iter"] == sds.size() + 1);
    CHECK(j["loss_sketch"].get<double>() >= -1.0);
    CHECK(j["loss_sketch"].get<double>() <= 1.0);
    sds.push_back(j["loss_sds"].get<double>());
  }
  REQUIRE(sds.size() == 200);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 50; ++i) {
    head += sds[i];
    tail += sds[150 + i];
  }
  CHECK(tail < head);

  // The final checkpoint renders the sketch view exactly like the trainer probe.
  const Checkpoint ck = load_checkpoint(run / "checkpoint.skfg");
  CHECK(ck.iteration == 200);
  Settings s = load_settings({run / "config.txt", {}});
  const RunConfig rc = resolve(s);
  Trainer trainer(ck.grid, *ck.optimizer, ck.iteration, rc.train, rc.schedule());
  const TurntableOptions one = rc.turntable(1, rc.train.sketch_elevation);
  CHECK(render(ck.grid, turntable_pose(one, 0), one.render).rgb.data == trainer.render_probe().data);

  TurntableCommandOptions tt;
  tt.config.file = run / "config.txt";
  tt.checkpoint = run / "checkpoint.skfg";
  tt.frames = 1;
  tt.out = dir.path / "tt1";
  std::ostringstream log;
  cmd_turntable(tt, log);
  write_rgb_png(trainer.render_probe(), dir.path / "probe.png");
  CHECK(slurp(dir.path / "tt1/frame_0000.png") == slurp(dir.path / "probe.png"));
}

TEST_CASE("missing sketch is a config error") {
  TempDir dir("nosketch");
  CHECK(run_cli("generate --prompt chair -o " + (dir.path / "run").string(), dir.path / "log.txt") == 2);
  CHECK(slurp(dir.path / "log.txt").find("--sketch") != std::string::npos);
  CHECK(run_cli("generate --prompt chair --sketch " + (dir.path / "nope.png").string(), dir.path / "log2.txt") == 2);
  CHECK(run_cli("generate --sketch x.png --set bogus=1", dir.path / "log3.txt") == 2);
  CHECK(run_cli("frobnicate", dir.path / "log4.txt") == 2);
}

TEST_CASE("same seed gives identical metrics") {
  TempDir dir("determinism");
  const fs::path sketch = write_sketch(dir.path);
  auto run = [&](const std::string& name) {
    GenerateOptions o;
    o.config.overrides = small_run();
    o.sketch = sketch.string();
    o.prompt = "a ball";
    o.seed = 99;
    o.iterations = 10;
    o.out = dir.path / name;
    std::ostringstream log;
    cmd_generate(o, log);
    return slurp(o.out / "metrics.jsonl");
  };
  const std::string a = run("a"), b = run("b");
  CHECK(!a.empty());
  CHECK(a == b);
}

TEST_CASE("turntable and eval-sketch commands") {
  TempDir dir("turntable");
  const fs::path ckpt = dir.path / "grid.skfg";
  save_checkpoint(ckpt, sketchforge::testing::random_grid(12, 3), nullptr, 0);
  const std::string cfg = " --set render.width=16 --set render.height=16 --set render.n_samples=16";

  CHECK(run_cli("turntable " + ckpt.string() + " --frames 8 -o " + (dir.path / "tt").string() + cfg, dir.path / "l1") == 0);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir.path / "tt")) files += entry.path().extension() == ".png";
  CHECK(files == 16);

  CHECK(run_cli("turntable " + ckpt.string() + " --frames 1 --azimuth-offset 37 -o " + (dir.path / "a").string() + cfg,
                dir.path / "l2") == 0);
  CHECK(run_cli("turntable " + ckpt.string() + " --frames 1 --azimuth-offset 397 -o " + (dir.path / "b").string() + cfg,
                dir.path / "l3") == 0);
  CHECK(slurp(dir.path / "a/frame_0000.png") == slurp(dir.path / "b/frame_0000.png"));
  CHECK(slurp(dir.path / "a/depth_0000.png") == slurp(dir.path / "b/depth_0000.png"));

  std::ofstream(dir.path / "corrupt.skfg", std::ios::binary) << "SKFG\x01\x00";
  CHECK(run_cli("turntable " + (dir.path / "corrupt.skfg").string(), dir.path / "l4") == 4);
  CHECK(run_cli("turntable " + (dir.path / "missing.skfg").string(), dir.path / "l5") == 4);

  const fs::path sketch = write_sketch(dir.path);
  const fs::path report = dir.path / "report.json";
  CHECK(run_cli("eval-sketch " + ckpt.string() + " --sketch " + sketch.string() + " --views 0 -o " + report.string() + cfg,
                dir.path / "l6") == 0);
  auto r = nlohmann::json::parse(slurp(report));
  CHECK(r["per_view"].empty());
  CHECK(r["mean"].is_null());

  CHECK(run_cli("eval-sketch " + ckpt.string() + " --sketch " + sketch.string() + " --views 4 -o " + report.string() + cfg,
                dir.path / "l7") == 0);
  r = nlohmann::json::parse(slurp(report));
  REQUIRE(r["per_view"].size() == 4);
  double sum = 0.0;
  for (const auto& v : r["per_view"]) {
    CHECK(v.get<double>() >= -1.0);
    CHECK(v.get<double>() <= 1.0);
    sum += v.get<double>();
  }
  CHECK(r["mean"].get<double>() == doctest::Approx(sum / 4));
  CHECK(r["std"].get<double>() >= 0.0);
  CHECK(r["sketch_sha256"] == sha256_hex(slurp(sketch)));
  CHECK(run_cli("eval-sketch " + (dir.path / "corrupt.skfg").string() + " --sketch " + sketch.string(), dir.path / "l8") == 4);
}

TEST_CASE("health command and remote transport failures") {
  TempDir dir("health");
  HealthStub ok;
  CHECK(run_cli("health --set service.base_url=" + ok.url(), dir.path / "l1") == 0);
  CHECK(slurp(dir.path / "l1").find("\"ok\"") != std::string::npos);

  ::setenv("SKETCHFORGE_SERVICE_URL", ok.url().c_str(), 1);
  CHECK(run_cli("health", dir.path / "l2") == 0);
  ::setenv("SKETCHFORGE_SERVICE_URL", "http://127.0.0.1:1", 1);
  CHECK(run_cli("health --set service.max_retries=0 --set service.timeout=1", dir.path / "l3") == 3);
  ::unsetenv("SKETCHFORGE_SERVICE_URL");

  const fs::path sketch = write_sketch(dir.path);
  std::string common = " --sketch " + sketch.string() + " --provider remote --iterations 3";
  for (const std::string& o : small_run()) common += " --set " + o;
  CHECK(run_cli("generate -o " + (dir.path / "zero").string() + common + " --set service.base_url=" + ok.url(),
                dir.path / "l4") == 0);
  const auto manifest = nlohmann::json::parse(slurp(dir.path / "zero/manifest.json"));
  CHECK(manifest["providers"]["guidance"] == "remote:" + ok.url());

  HealthStub failing(503);
  CHECK(run_cli("generate -o " + (dir.path / "fail").string() + common + " --set service.base_url=" + failing.url() +
                    " --set service.max_retries=1 --set service.backoff=0.01",
                dir.path / "l5") == 3);
  CHECK(fs::exists(dir.path / "fail/checkpoint.skfg"));
}
