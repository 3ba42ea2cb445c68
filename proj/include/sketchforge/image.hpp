#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sketchforge {

// Dense H x W x C image, row-major with interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, fill) {}

  size_t size() const { return data.size(); }
  size_t pixels() const { return static_cast<size_t>(height) * width; }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  double& at(int y, int x, int c = 0) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

// Peak signal-to-noise ratio for images in [0,1]. Identical images give +inf.
double psnr(const Image& a, const Image& b);

double mean_squared_error(const Image& a, const Image& b);

// Bilinear resize with half-pixel centers and edge clamping. Linear in the input.
Image resize_bilinear(const Image& src, int out_height, int out_width);

// Adjoint of resize_bilinear: maps a gradient on the resized image back to the source grid.
Image resize_bilinear_backward(const Image& grad_out, int src_height, int src_width);

// Rec. 601 luma of an RGB image, single channel.
Image to_grayscale(const Image& rgb);
Image to_grayscale_backward(const Image& grad_gray);

}  // namespace sketchforge
