#include "sketchforge/checkpoint.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "sketchforge/byte_io.hpp"
#include "sketchforge/errors.hpp"

namespace sketchforge {

namespace {
constexpr char kMagic[4] = {'S', 'K', 'F', 'G'};
constexpr uint32_t kMaxAxis = 4096;
}  // namespace

std::string encode_checkpoint(const VoxelGrid& grid, const OptimizerState* opt, uint64_t iteration) {
  grid.validate();
  if (opt && !opt->matches(grid)) throw InputError("optimizer state does not match grid");
  std::string out(kMagic, 4);
  bytes::put_uint<uint32_t>(out, kCheckpointVersion);
  for (int r : grid.resolution) bytes::put_uint<uint32_t>(out, static_cast<uint32_t>(r));
  for (int a = 0; a < 3; ++a) bytes::put_f64(out, grid.bounds.lo[a]);
  for (int a = 0; a < 3; ++a) bytes::put_f64(out, grid.bounds.hi[a]);
  bytes::put_uint<uint32_t>(out, static_cast<uint32_t>(grid.density_activation));
  bytes::put_uint<uint32_t>(out, static_cast<uint32_t>(grid.color_activation));
  bytes::put_uint<uint64_t>(out, iteration);
  bytes::put_uint<uint32_t>(out, opt ? 1u : 0u);
  if (opt) {
    bytes::put_uint<uint64_t>(out, opt->step);
    for (double v : {opt->params.lr_density, opt->params.lr_color, opt->params.beta1, opt->params.beta2, opt->params.epsilon})
      bytes::put_f64(out, v);
  }
  bytes::put_f32_array(out, grid.density_logits);
  bytes::put_f32_array(out, grid.color_feats);
  if (opt) {
    bytes::put_f32_array(out, opt->m_density);
    bytes::put_f32_array(out, opt->v_density);
    bytes::put_f32_array(out, opt->m_color);
    bytes::put_f32_array(out, opt->v_color);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& data) {
  bytes::Reader in(data);
  if (in.get_bytes(4) != std::string_view(kMagic, 4)) throw LoadError("not a checkpoint (bad magic)");
  const auto version = in.get_uint<uint32_t>();
  if (!in.ok()) throw LoadError("truncated checkpoint header");
  if (version != kCheckpointVersion) throw LoadError(fmt::format("unsupported checkpoint version {}", version));

  Checkpoint ck;
  VoxelGrid& g = ck.grid;
  for (int& r : g.resolution) {
    const auto v = in.get_uint<uint32_t>();
    if (v < 2 || v > kMaxAxis) throw LoadError("checkpoint resolution out of range");
    r = static_cast<int>(v);
  }
  for (int a = 0; a < 3; ++a) g.bounds.lo[a] = in.get_f64();
  for (int a = 0; a < 3; ++a) g.bounds.hi[a] = in.get_f64();
  const auto dact = in.get_uint<uint32_t>();
  const auto cact = in.get_uint<uint32_t>();
  ck.iteration = in.get_uint<uint64_t>();
  const auto has_opt = in.get_uint<uint32_t>();
  if (!in.ok()) throw LoadError("truncated checkpoint header");
  if (dact > static_cast<uint32_t>(DensityActivation::exp) || cact != 0 || has_opt > 1)
    throw LoadError("corrupt checkpoint header");
  g.density_activation = static_cast<DensityActivation>(dact);
  g.color_activation = ColorActivation::sigmoid;
  try {
    g.validate();
  } catch (const InputError& e) {
    throw LoadError(fmt::format("corrupt checkpoint header: {}", e.what()));
  }

  const size_t n = g.vertex_count();
  OptimizerState opt;
  if (has_opt) {
    opt.step = in.get_uint<uint64_t>();
    opt.params.lr_density = in.get_f64();
    opt.params.lr_color = in.get_f64();
    opt.params.beta1 = in.get_f64();
    opt.params.beta2 = in.get_f64();
    opt.params.epsilon = in.get_f64();
  }
  const size_t floats = 4 * n * (has_opt ? 3 : 1);
  if (!in.ok() || in.remaining() != floats * sizeof(float))
    throw LoadError(fmt::format("checkpoint payload has {} bytes, expected {}", in.remaining(), floats * sizeof(float)));
  g.density_logits.resize(n);
  g.color_feats.resize(3 * n);
  in.get_f32_array(g.density_logits);
  in.get_f32_array(g.color_feats);
  if (has_opt) {
    opt.m_density.resize(n);
    opt.v_density.resize(n);
    opt.m_color.resize(3 * n);
    opt.v_color.resize(3 * n);
    in.get_f32_array(opt.m_density);
    in.get_f32_array(opt.v_density);
    in.get_f32_array(opt.m_color);
    in.get_f32_array(opt.v_color);
    ck.optimizer = std::move(opt);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const VoxelGrid& grid, const OptimizerState* optimizer,
                     uint64_t iteration) {
  const std::string bytes = encode_checkpoint(grid, optimizer, iteration);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", tmp.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error(fmt::format("short write to {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(fmt::format("cannot open checkpoint {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace sketchforge
