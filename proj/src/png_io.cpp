#include "sketchforge/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <vector>

#include "sketchforge/errors.hpp"

namespace sketchforge {

void write_png(const Image& image, const std::filesystem::path& path) {
  if (image.channels != 1 && image.channels != 3) throw InputError("write_png: expected 1 or 3 channels");
  std::vector<png_byte> bytes(image.size());
  for (size_t i = 0; i < image.size(); ++i)
    bytes[i] = static_cast<png_byte>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw std::runtime_error(fmt::format("failed to write {}: {}", path.string(), img.message));
}

Image read_png_rgb(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw LoadError(fmt::format("cannot read PNG {}: {}", path.string(), img.message));
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&img);
    throw LoadError(fmt::format("cannot decode PNG {}: {}", path.string(), img.message));
  }
  Image out(static_cast<int>(img.height), static_cast<int>(img.width), 3);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = bytes[i] / 255.0;
  return out;
}

}  // namespace sketchforge
