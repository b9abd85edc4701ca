#pragma once

#include <filesystem>

#include "plenograsp/image.hpp"

namespace plenograsp {

// Minimal PNG codec over zlib. Writes 8-bit RGB (3 channels) or grayscale
// (1 channel), non-interlaced. Reads 8-bit gray / RGB / RGBA (alpha dropped),
// rejecting palette, 16-bit, and interlaced files. Values map to float as
// k/255; writing uses quantize8 rounding.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

}  // namespace plenograsp
