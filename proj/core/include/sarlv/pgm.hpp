#pragma once

#include <filesystem>

#include "sarlv/image.hpp"

namespace sarlv {

/// Binary 8-bit PGM (P5, maxval 255). Values quantize to round(v * 255).
void write_pgm(const std::filesystem::path& file, const GrayImage& image);

/// Reads P5; pixel values normalize to [0, 1] by /255.
GrayImage read_pgm(const std::filesystem::path& file);

}  // namespace sarlv
