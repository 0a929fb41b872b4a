#pragma once

#include <cstdint>
#include <vector>

namespace sarlv {

/// Row-major grayscale image with values in [0, 1].
struct GrayImage {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<double> pixels;

    double at(std::int64_t y, std::int64_t x) const {
        return pixels[static_cast<std::size_t>(y * width + x)];
    }
    double& at(std::int64_t y, std::int64_t x) {
        return pixels[static_cast<std::size_t>(y * width + x)];
    }
};

GrayImage make_image(std::int64_t height, std::int64_t width, double fill = 0.0);

/// Bilinear resample to the given square size.
GrayImage resize_bilinear(const GrayImage& src, std::int64_t out_hw);

}  // namespace sarlv
