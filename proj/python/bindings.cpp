#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <sstream>

#include "sketchforge/checkpoint.hpp"
#include "sketchforge/codec.hpp"
#include "sketchforge/commands.hpp"
#include "sketchforge/errors.hpp"
#include "sketchforge/render.hpp"
#include "sketchforge/scene.hpp"
#include "sketchforge/schedule.hpp"

namespace py = pybind11;
using namespace sketchforge;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

F64 image_to_numpy(const Image& img) {
  F64 out(std::vector<py::ssize_t>{img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Image numpy_to_image(const F64& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw InputError("image arrays must be HxW or HxWxC");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1);
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

// Density as (nz, ny, nx), color as (nz, ny, nx, 3); matches the x-fastest storage.
F32 density_array(const VoxelGrid& g) {
  F32 out(std::vector<py::ssize_t>{g.resolution[2], g.resolution[1], g.resolution[0]});
  std::copy(g.density_logits.begin(), g.density_logits.end(), out.mutable_data());
  return out;
}

F32 color_array(const VoxelGrid& g) {
  F32 out(std::vector<py::ssize_t>{g.resolution[2], g.resolution[1], g.resolution[0], 3});
  std::copy(g.color_feats.begin(), g.color_feats.end(), out.mutable_data());
  return out;
}

void assign(std::vector<float>& dst, const F32& src, const char* what) {
  if (static_cast<size_t>(src.size()) != dst.size()) throw InputError(std::string(what) + ": size mismatch");
  std::copy(src.data(), src.data() + src.size(), dst.begin());
}

py::bytes encode_message(const std::string& fields_json, const std::vector<std::pair<std::string, F32>>& arrays) {
  wire::Message m;
  m.fields = nlohmann::json::parse(fields_json);
  for (const auto& [name, a] : arrays) {
    wire::Array arr;
    arr.name = name;
    for (py::ssize_t d = 0; d < a.ndim(); ++d) arr.dims.push_back(a.shape(d));
    arr.values.assign(a.data(), a.data() + a.size());
    m.arrays.push_back(std::move(arr));
  }
  return py::bytes(wire::encode(m));
}

py::tuple decode_message(const py::bytes& body) {
  const wire::Message m = wire::decode(std::string(body));
  py::list arrays;
  for (const wire::Array& a : m.arrays) {
    F32 values(std::vector<py::ssize_t>(a.dims.begin(), a.dims.end()));
    std::copy(a.values.begin(), a.values.end(), values.mutable_data());
    arrays.append(py::make_tuple(a.name, values));
  }
  return py::make_tuple(m.fields.dump(), arrays);
}

ConfigSources sources(const std::optional<std::filesystem::path>& config, const std::vector<std::string>& overrides) {
  return ConfigSources{config, overrides};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "sketchforge core bindings";
  m.attr("__version__") = kVersion;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);
  py::register_exception<TransportError>(m, "TransportError", PyExc_ConnectionError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

  py::class_<VoxelGrid>(m, "VoxelGrid")
      .def_property_readonly("resolution", [](const VoxelGrid& g) { return g.resolution; })
      .def_property_readonly("bounds", [](const VoxelGrid& g) {
        return py::make_tuple(py::make_tuple(g.bounds.lo.x(), g.bounds.lo.y(), g.bounds.lo.z()),
                              py::make_tuple(g.bounds.hi.x(), g.bounds.hi.y(), g.bounds.hi.z()));
      })
      .def_property_readonly("density_activation", [](const VoxelGrid& g) { return to_string(g.density_activation); })
      .def_property(
          "density_logits", &density_array,
          [](VoxelGrid& g, const F32& a) { assign(g.density_logits, a, "density_logits"); })
      .def_property(
          "color_feats", &color_array, [](VoxelGrid& g, const F32& a) { assign(g.color_feats, a, "color_feats"); });

  m.def("make_default_grid", &make_default_grid, py::arg("resolution") = 64);
  m.def("make_toy_scene", &make_toy_scene, py::arg("resolution") = 48);

  py::class_<CameraPose>(m, "CameraPose")
      .def_readwrite("fov_y", &CameraPose::fov_y)
      .def_readwrite("width", &CameraPose::width)
      .def_readwrite("height", &CameraPose::height)
      .def_readwrite("near", &CameraPose::near)
      .def_readwrite("far", &CameraPose::far)
      .def_property_readonly("position", [](const CameraPose& p) {
        return py::make_tuple(p.position.x(), p.position.y(), p.position.z());
      });
  m.def("orbit_pose", &orbit_pose, py::arg("azimuth"), py::arg("elevation"), py::arg("radius") = 3.0,
        py::arg("fov_y") = 0.6981317007977318, py::arg("width") = 64, py::arg("height") = 64);

  m.def(
      "render",
      [](const VoxelGrid& grid, const CameraPose& pose, int n_samples, bool stratified, uint64_t seed,
         bool white_background) {
        RenderOptions opt;
        opt.n_samples = n_samples;
        opt.stratified = stratified;
        opt.seed = seed;
        opt.white_background = white_background;
        RenderOutput out;
        {
          py::gil_scoped_release release;
          out = render(grid, pose, opt);
        }
        py::dict d;
        d["rgb"] = image_to_numpy(out.rgb);
        d["depth"] = image_to_numpy(out.depth);
        d["final_transmittance"] = image_to_numpy(out.final_transmittance);
        return d;
      },
      py::arg("grid"), py::arg("pose"), py::arg("n_samples") = 96, py::arg("stratified") = true, py::arg("seed") = 0,
      py::arg("white_background") = false);

  m.def("psnr", [](const F64& a, const F64& b) { return psnr(numpy_to_image(a), numpy_to_image(b)); });

  m.def(
      "save_checkpoint",
      [](const std::filesystem::path& path, const VoxelGrid& grid, uint64_t iteration) {
        save_checkpoint(path, grid, nullptr, iteration);
      },
      py::arg("path"), py::arg("grid"), py::arg("iteration") = 0);
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        Checkpoint c = load_checkpoint(path);
        return py::make_tuple(std::move(c.grid), c.iteration, c.optimizer.has_value());
      },
      py::arg("path"));

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_static("linear", [](int steps, double beta_start, double beta_end) {
        return NoiseSchedule::linear(steps, beta_start, beta_end);
      }, py::arg("steps") = 1000, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 2e-2)
      .def_property_readonly("steps", &NoiseSchedule::steps)
      .def("beta", &NoiseSchedule::beta)
      .def("alpha", &NoiseSchedule::alpha)
      .def("alpha_bar", &NoiseSchedule::alpha_bar)
      .def("weight", [](const NoiseSchedule& s, int t) { return weight(s, t); })
      .def("add_noise", [](const NoiseSchedule& s, const F64& x0, int t, const F64& eps) {
        return image_to_numpy(add_noise(s, numpy_to_image(x0), t, numpy_to_image(eps)));
      });

  m.def("_encode", &encode_message, py::arg("fields_json"), py::arg("arrays"));
  m.def("_decode", &decode_message, py::arg("body"));

  m.def(
      "_generate",
      [](const std::filesystem::path& out, const std::optional<std::string>& sketch, const std::optional<std::string>& prompt,
         std::optional<int> iterations, std::optional<uint64_t> seed, const std::optional<std::filesystem::path>& config,
         const std::vector<std::string>& overrides) {
        GenerateOptions o;
        o.config = sources(config, overrides);
        o.out = out;
        o.sketch = sketch;
        o.prompt = prompt;
        o.iterations = iterations;
        o.seed = seed;
        std::ostringstream log;
        py::gil_scoped_release release;
        cmd_generate(o, log);
      },
      py::arg("out"), py::arg("sketch"), py::arg("prompt"), py::arg("iterations"), py::arg("seed"), py::arg("config"),
      py::arg("overrides"));
  m.def(
      "_turntable",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& out, int frames,
         std::optional<double> elevation_deg, double azimuth_offset_deg, const std::optional<std::filesystem::path>& config,
         const std::vector<std::string>& overrides) {
        TurntableCommandOptions o;
        o.config = sources(config, overrides);
        o.checkpoint = checkpoint;
        o.out = out;
        o.frames = frames;
        o.elevation_deg = elevation_deg;
        o.azimuth_offset_deg = azimuth_offset_deg;
        std::ostringstream log;
        py::gil_scoped_release release;
        return cmd_turntable(o, log);
      },
      py::arg("checkpoint"), py::arg("out"), py::arg("frames"), py::arg("elevation_deg"), py::arg("azimuth_offset_deg"),
      py::arg("config"), py::arg("overrides"));
  m.def(
      "_eval_sketch",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& sketch, int views,
         const std::optional<std::filesystem::path>& config, const std::vector<std::string>& overrides) {
        EvalSketchOptions o;
        o.config = sources(config, overrides);
        o.checkpoint = checkpoint;
        o.sketch = sketch;
        o.views = views;
        std::ostringstream log;
        std::string report;
        {
          py::gil_scoped_release release;
          report = cmd_eval_sketch(o, log).dump();
        }
        return report;
      },
      py::arg("checkpoint"), py::arg("sketch"), py::arg("views"), py::arg("config"), py::arg("overrides"));
}
