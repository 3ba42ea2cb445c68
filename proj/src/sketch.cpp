#include "sketchforge/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <random>

#include "sketchforge/errors.hpp"
#include "sketchforge/png_io.hpp"

namespace sketchforge {

void SketchImage::validate() const {
  if (strokes.channels != 1 || strokes.size() == 0) throw InputError("sketch must be a non-empty single-channel image");
  for (double v : strokes.data)
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("sketch values must lie in [0,1]");
}

double EmbeddingVector::dot(const EmbeddingVector& o) const {
  if (values.size() != o.values.size()) throw InputError("embedding length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < values.size(); ++i) acc += values[i] * o.values[i];
  return acc;
}

std::string to_string(StrokePolarity p) {
  return p == StrokePolarity::dark_on_light ? "dark_on_light" : "light_on_dark";
}

LoadedSketch sketch_from_rgb(const Image& rgb) {
  const Image gray = to_grayscale(rgb);
  double mean = 0.0;
  for (double v : gray.data) mean += v;
  mean /= static_cast<double>(std::max<size_t>(gray.size(), 1));
  LoadedSketch out{{gray}, mean > 0.5 ? StrokePolarity::dark_on_light : StrokePolarity::light_on_dark};
  for (double& v : out.sketch.strokes.data) {
    v = std::clamp(v, 0.0, 1.0);
    if (out.polarity == StrokePolarity::dark_on_light) v = 1.0 - v;
  }
  return out;
}

LoadedSketch load_sketch_png(const std::filesystem::path& path) { return sketch_from_rgb(read_png_rgb(path)); }

// ---- Gaussian blur ---------------------------------------------------------

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= total;
  return k;
}

// One separable pass. `forward` gathers from clamped neighbours; the adjoint
// scatters to them.
Image blur_pass(const Image& x, const std::vector<double>& k, bool along_x, bool adjoint) {
  const int radius = static_cast<int>(k.size() / 2);
  Image out(x.height, x.width, x.channels);
  for (int y = 0; y < x.height; ++y)
    for (int xx = 0; xx < x.width; ++xx)
      for (int c = 0; c < x.channels; ++c) {
        const double v = adjoint ? x.at(y, xx, c) : 0.0;
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j) {
          const int sy = along_x ? y : std::clamp(y + j, 0, x.height - 1);
          const int sx = along_x ? std::clamp(xx + j, 0, x.width - 1) : xx;
          if (adjoint)
            out.at(sy, sx, c) += k[j + radius] * v;
          else
            acc += k[j + radius] * x.at(sy, sx, c);
        }
        if (!adjoint) out.at(y, xx, c) = acc;
      }
  return out;
}

}  // namespace

Image gaussian_blur(const Image& x, double sigma) {
  const auto k = gaussian_kernel(sigma);
  return blur_pass(blur_pass(x, k, true, false), k, false, false);
}

Image gaussian_blur_adjoint(const Image& g, double sigma) {
  const auto k = gaussian_kernel(sigma);
  return blur_pass(blur_pass(g, k, false, true), k, true, true);
}

// ---- photo-to-sketch -------------------------------------------------------

namespace {

Image difference_of_gaussians(const Image& gray, const SketchEstimatorParams& p) {
  Image fine = gaussian_blur(gray, p.sigma_fine);
  const Image coarse = gaussian_blur(gray, p.sigma_coarse);
  for (size_t i = 0; i < fine.size(); ++i) fine.data[i] -= coarse.data[i];
  return fine;
}

}  // namespace

SketchImage local_sketch_estimate(const Image& rgb, const SketchEstimatorParams& p) {
  const Image dog = difference_of_gaussians(to_grayscale(rgb), p);
  SketchImage out{Image(dog.height, dog.width, 1)};
  for (size_t i = 0; i < dog.size(); ++i) {
    const double u = p.gain * dog.data[i];
    out.strokes.data[i] = std::tanh(u * u);
  }
  return out;
}

Image local_sketch_estimate_backward(const Image& rgb, const Image& grad_sketch, const SketchEstimatorParams& p) {
  const Image dog = difference_of_gaussians(to_grayscale(rgb), p);
  if (!grad_sketch.same_shape(dog)) throw InputError("sketch estimate gradient shape mismatch");
  Image g_dog(dog.height, dog.width, 1);
  for (size_t i = 0; i < dog.size(); ++i) {
    const double u = p.gain * dog.data[i];
    const double s = std::tanh(u * u);
    g_dog.data[i] = grad_sketch.data[i] * (1.0 - s * s) * 2.0 * u * p.gain;
  }
  Image g_gray = gaussian_blur_adjoint(g_dog, p.sigma_fine);
  const Image g_coarse = gaussian_blur_adjoint(g_dog, p.sigma_coarse);
  for (size_t i = 0; i < g_gray.size(); ++i) g_gray.data[i] -= g_coarse.data[i];
  return to_grayscale_backward(g_gray);
}

// ---- embedding -------------------------------------------------------------

namespace {
constexpr int kCellSize = kEmbedInputSize / kEmbedCells;
constexpr int kPooled = kEmbedCells * kEmbedCells;
}  // namespace

LocalEmbedder::LocalEmbedder() : projection_(static_cast<size_t>(kEmbedDim) * kPooled), bias_(kEmbedDim) {
  std::mt19937_64 rng(kEmbedProjectionSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kPooled));
  for (double& v : projection_) v = normal(rng) * scale;
  double norm = 0.0;
  for (double& v : bias_) {
    v = normal(rng);
    norm += v * v;
  }
  for (double& v : bias_) v *= kEmbedBiasScale / std::sqrt(norm);
}

const LocalEmbedder& LocalEmbedder::instance() {
  static const LocalEmbedder embedder;
  return embedder;
}

std::vector<double> LocalEmbedder::project(const SketchImage& sketch) const {
  if (sketch.strokes.channels != 1) throw InputError("embedding input must be single channel");
  const Image resized = resize_bilinear(sketch.strokes, kEmbedInputSize, kEmbedInputSize);
  std::vector<double> pooled(kPooled, 0.0);
  for (int y = 0; y < kEmbedInputSize; ++y)
    for (int x = 0; x < kEmbedInputSize; ++x) pooled[(y / kCellSize) * kEmbedCells + x / kCellSize] += resized.at(y, x);
  for (double& v : pooled) v /= kCellSize * kCellSize;
  std::vector<double> z = bias_;
  for (int r = 0; r < kEmbedDim; ++r) {
    const double* row = projection_.data() + static_cast<size_t>(r) * kPooled;
    double acc = 0.0;
    for (int c = 0; c < kPooled; ++c) acc += row[c] * pooled[c];
    z[r] += acc;
  }
  return z;
}

EmbeddingVector normalize(std::vector<double> z) {
  double norm = 0.0;
  for (double v : z) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw InputError("cannot normalize a zero embedding");
  for (double& v : z) v /= norm;
  return {std::move(z), true};
}

EmbeddingVector LocalEmbedder::embed(const SketchImage& sketch) const { return normalize(project(sketch)); }

Image LocalEmbedder::embed_backward(const SketchImage& sketch, const std::vector<double>& upstream) const {
  if (upstream.size() != static_cast<size_t>(kEmbedDim)) throw InputError("embedding gradient length mismatch");
  const std::vector<double> z = project(sketch);
  double norm = 0.0;
  for (double v : z) norm += v * v;
  norm = std::sqrt(norm);
  double e_dot_u = 0.0;
  for (int i = 0; i < kEmbedDim; ++i) e_dot_u += z[i] / norm * upstream[i];
  std::vector<double> dz(kEmbedDim);
  for (int i = 0; i < kEmbedDim; ++i) dz[i] = (upstream[i] - z[i] / norm * e_dot_u) / norm;
  std::vector<double> dpool(kPooled, 0.0);
  for (int r = 0; r < kEmbedDim; ++r) {
    const double* row = projection_.data() + static_cast<size_t>(r) * kPooled;
    for (int c = 0; c < kPooled; ++c) dpool[c] += row[c] * dz[r];
  }
  Image dresized(kEmbedInputSize, kEmbedInputSize, 1);
  const double inv_area = 1.0 / (kCellSize * kCellSize);
  for (int y = 0; y < kEmbedInputSize; ++y)
    for (int x = 0; x < kEmbedInputSize; ++x)
      dresized.at(y, x) = dpool[(y / kCellSize) * kEmbedCells + x / kCellSize] * inv_area;
  return resize_bilinear_backward(dresized, sketch.strokes.height, sketch.strokes.width);
}

EmbeddingVector local_embed(const SketchImage& sketch) { return LocalEmbedder::instance().embed(sketch); }

// ---- loss ------------------------------------------------------------------

SketchLossResult LocalSketchLossProvider::evaluate(const Image& rgb, const SketchImage& sketch) {
  if (rgb.channels != 3) throw InputError("sketch loss expects an RGB render");
  const LocalEmbedder& embedder = LocalEmbedder::instance();
  const Image resized = resize_bilinear(rgb, kEmbedInputSize, kEmbedInputSize);
  const SketchImage estimated = local_sketch_estimate(resized, params_);
  const EmbeddingVector e_render = embedder.embed(estimated);
  const EmbeddingVector e_sketch = embedder.embed(sketch);
  SketchLossResult out;
  out.loss = -e_render.dot(e_sketch);
  std::vector<double> upstream(e_sketch.values);
  for (double& v : upstream) v = -v;
  const Image d_estimated = embedder.embed_backward(estimated, upstream);
  const Image d_resized = local_sketch_estimate_backward(resized, d_estimated, params_);
  out.d_loss_dx = resize_bilinear_backward(d_resized, rgb.height, rgb.width);
  return out;
}

SketchLossResult sketch_loss(SketchLossProvider& provider, const Image& rgb, const SketchImage& sketch) {
  sketch.validate();
  SketchLossResult r = provider.evaluate(rgb, sketch);
  if (!(r.loss >= -1.0 - 1e-9 && r.loss <= 1.0 + 1e-9))
    throw ProtocolError(fmt::format("sketch loss {} outside [-1, 1]", r.loss));
  r.loss = std::clamp(r.loss, -1.0, 1.0);
  if (!r.d_loss_dx.same_shape(rgb)) throw ProtocolError("sketch loss gradient shape differs from the render");
  for (double v : r.d_loss_dx.data)
    if (!std::isfinite(v)) throw ProtocolError("sketch loss gradient is not finite");
  return r;
}

}  // namespace sketchforge
