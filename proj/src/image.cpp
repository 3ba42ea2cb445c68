#include "sketchforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sketchforge/errors.hpp"

namespace sketchforge {

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Half-pixel-center sampling positions along one axis.
std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src - 1);
    taps[i] = {lo, hi, s - lo};
  }
  return taps;
}

}  // namespace

double mean_squared_error(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InputError("mean_squared_error: shape mismatch");
  if (a.size() == 0) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

Image resize_bilinear(const Image& src, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1 || src.height < 1 || src.width < 1)
    throw InputError("resize_bilinear: empty image");
  const auto ty = bilinear_taps(src.height, out_height);
  const auto tx = bilinear_taps(src.width, out_width);
  Image out(out_height, out_width, src.channels);
  for (int y = 0; y < out_height; ++y) {
    const Tap& a = ty[y];
    for (int x = 0; x < out_width; ++x) {
      const Tap& b = tx[x];
      for (int c = 0; c < src.channels; ++c) {
        const double top = (1 - b.frac) * src.at(a.lo, b.lo, c) + b.frac * src.at(a.lo, b.hi, c);
        const double bot = (1 - b.frac) * src.at(a.hi, b.lo, c) + b.frac * src.at(a.hi, b.hi, c);
        out.at(y, x, c) = (1 - a.frac) * top + a.frac * bot;
      }
    }
  }
  return out;
}

Image resize_bilinear_backward(const Image& grad_out, int src_height, int src_width) {
  const auto ty = bilinear_taps(src_height, grad_out.height);
  const auto tx = bilinear_taps(src_width, grad_out.width);
  Image g(src_height, src_width, grad_out.channels);
  for (int y = 0; y < grad_out.height; ++y) {
    const Tap& a = ty[y];
    for (int x = 0; x < grad_out.width; ++x) {
      const Tap& b = tx[x];
      for (int c = 0; c < grad_out.channels; ++c) {
        const double v = grad_out.at(y, x, c);
        g.at(a.lo, b.lo, c) += (1 - a.frac) * (1 - b.frac) * v;
        g.at(a.lo, b.hi, c) += (1 - a.frac) * b.frac * v;
        g.at(a.hi, b.lo, c) += a.frac * (1 - b.frac) * v;
        g.at(a.hi, b.hi, c) += a.frac * b.frac * v;
      }
    }
  }
  return g;
}

namespace {
constexpr double kLuma[3] = {0.299, 0.587, 0.114};
}

Image to_grayscale(const Image& rgb) {
  if (rgb.channels != 3) throw InputError("to_grayscale: expected 3 channels");
  Image g(rgb.height, rgb.width, 1);
  for (size_t p = 0; p < rgb.pixels(); ++p)
    g.data[p] = kLuma[0] * rgb.data[3 * p] + kLuma[1] * rgb.data[3 * p + 1] + kLuma[2] * rgb.data[3 * p + 2];
  return g;
}

Image to_grayscale_backward(const Image& grad_gray) {
  Image g(grad_gray.height, grad_gray.width, 3);
  for (size_t p = 0; p < grad_gray.pixels(); ++p)
    for (int c = 0; c < 3; ++c) g.data[3 * p + c] = kLuma[c] * grad_gray.data[p];
  return g;
}

}  // namespace sketchforge
