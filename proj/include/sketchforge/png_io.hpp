#pragma once

#include <filesystem>

#include "sketchforge/image.hpp"

namespace sketchforge {

// 8-bit PNG. Images with 1 channel are written as grayscale, 3 as RGB; values
// are clamped to [0,1] and rounded.
void write_png(const Image& image, const std::filesystem::path& path);

// Reads any PNG as 8-bit RGB in [0,1]. Throws LoadError.
Image read_png_rgb(const std::filesystem::path& path);

}  // namespace sketchforge
