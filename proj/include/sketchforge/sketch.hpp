#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sketchforge/image.hpp"

namespace sketchforge {

// Single-channel stroke map in [0,1]; 1 is ink, 0 is blank paper.
struct SketchImage {
  Image strokes;

  void validate() const;
};

struct EmbeddingVector {
  std::vector<double> values;
  bool normalized = false;

  double dot(const EmbeddingVector& other) const;
};

enum class StrokePolarity { dark_on_light, light_on_dark };
std::string to_string(StrokePolarity p);

struct LoadedSketch {
  SketchImage sketch;
  StrokePolarity polarity;
};

// Converts a PNG to a stroke map. A majority-light background means dark
// pixels are strokes.
LoadedSketch load_sketch_png(const std::filesystem::path& path);
LoadedSketch sketch_from_rgb(const Image& rgb);

// ---- local photo-to-sketch operator --------------------------------------

struct SketchEstimatorParams {
  double sigma_fine = 1.0;    // px
  double sigma_coarse = 1.6;  // px
  double gain = 10.0;
};

// Luma -> difference of Gaussians -> tanh((gain * dog)^2). Replicate padding.
SketchImage local_sketch_estimate(const Image& rgb, const SketchEstimatorParams& params = {});

// Vector-Jacobian product of local_sketch_estimate at `rgb`.
Image local_sketch_estimate_backward(const Image& rgb, const Image& grad_sketch, const SketchEstimatorParams& params = {});

// Separable Gaussian blur with replicate padding, and its adjoint.
Image gaussian_blur(const Image& x, double sigma);
Image gaussian_blur_adjoint(const Image& g, double sigma);

// ---- local embedding -----------------------------------------------------

constexpr int kEmbedInputSize = 224;
constexpr int kEmbedCells = 14;  // 14 x 14 average-pooled cells of 16 x 16 px
constexpr int kEmbedDim = 512;
constexpr uint64_t kEmbedProjectionSeed = 0x5EED5EEDULL;
constexpr double kEmbedBiasScale = 1e-6;

// Fixed random projection used by local_embed.
class LocalEmbedder {
 public:
  LocalEmbedder();

  // Unnormalized projection output z = P pool(resize(s)) + bias.
  std::vector<double> project(const SketchImage& sketch) const;
  EmbeddingVector embed(const SketchImage& sketch) const;
  // Gradient of <embed(sketch), upstream> w.r.t. the sketch pixels.
  Image embed_backward(const SketchImage& sketch, const std::vector<double>& upstream) const;

  static const LocalEmbedder& instance();

 private:
  std::vector<double> projection_;  // kEmbedDim x cells^2, row-major
  std::vector<double> bias_;
};

EmbeddingVector local_embed(const SketchImage& sketch);

// L2-normalize in place of a copy.
EmbeddingVector normalize(std::vector<double> z);

// ---- sketch-consistency loss --------------------------------------------

struct SketchLossResult {
  double loss = 0.0;  // -E(G(x)) . E(I_s), in [-1, 1]
  Image d_loss_dx;    // H x W x 3
};

class SketchLossProvider {
 public:
  virtual ~SketchLossProvider() = default;
  virtual SketchLossResult evaluate(const Image& rgb, const SketchImage& sketch) = 0;
  virtual std::string identity() const = 0;
};

// Render -> bilinear resize to 224 x 224 -> local sketch estimate -> local
// embedding, with an exact analytic gradient.
class LocalSketchLossProvider : public SketchLossProvider {
 public:
  explicit LocalSketchLossProvider(SketchEstimatorParams params = {}) : params_(params) {}
  SketchLossResult evaluate(const Image& rgb, const SketchImage& sketch) override;
  std::string identity() const override { return "local-dog-proj512"; }

 private:
  SketchEstimatorParams params_;
};

// Evaluates and checks the provider result against the loss contract.
SketchLossResult sketch_loss(SketchLossProvider& provider, const Image& rgb, const SketchImage& sketch);

}  // namespace sketchforge
