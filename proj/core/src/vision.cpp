#include "sarlv/vision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sarlv {

GrayImage make_image(std::int64_t height, std::int64_t width, double fill) {
    GrayImage img;
    img.height = height;
    img.width = width;
    img.pixels.assign(static_cast<std::size_t>(height * width), fill);
    return img;
}

GrayImage resize_bilinear(const GrayImage& src, std::int64_t out_hw) {
    GrayImage dst = make_image(out_hw, out_hw);
    double sy = static_cast<double>(src.height) / static_cast<double>(out_hw);
    double sx = static_cast<double>(src.width) / static_cast<double>(out_hw);
    for (std::int64_t y = 0; y < out_hw; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        std::int64_t y0 = static_cast<std::int64_t>(std::floor(fy));
        double wy = fy - static_cast<double>(y0);
        std::int64_t y0c = std::clamp<std::int64_t>(y0, 0, src.height - 1);
        std::int64_t y1c = std::clamp<std::int64_t>(y0 + 1, 0, src.height - 1);
        for (std::int64_t x = 0; x < out_hw; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            std::int64_t x0 = static_cast<std::int64_t>(std::floor(fx));
            double wx = fx - static_cast<double>(x0);
            std::int64_t x0c = std::clamp<std::int64_t>(x0, 0, src.width - 1);
            std::int64_t x1c = std::clamp<std::int64_t>(x0 + 1, 0, src.width - 1);
            double top = src.at(y0c, x0c) * (1 - wx) + src.at(y0c, x1c) * wx;
            double bot = src.at(y1c, x0c) * (1 - wx) + src.at(y1c, x1c) * wx;
            dst.at(y, x) = top * (1 - wy) + bot * wy;
        }
    }
    return dst;
}

Tensor patchify(const GrayImage& image, std::int64_t patch_size) {
    if (patch_size <= 0) {
        throw std::invalid_argument("patchify: patch size must be positive, got " +
                                    std::to_string(patch_size));
    }
    if (image.height < 1 || image.width < 1) {
        throw std::invalid_argument("patchify: empty image");
    }
    std::int64_t rows = (image.height + patch_size - 1) / patch_size;
    std::int64_t cols = (image.width + patch_size - 1) / patch_size;
    std::int64_t n = rows * cols;
    std::int64_t pp = patch_size * patch_size;
    std::vector<double> out(static_cast<std::size_t>(n * pp), 0.0);
    for (std::int64_t pr = 0; pr < rows; ++pr) {
        for (std::int64_t pc = 0; pc < cols; ++pc) {
            double* dst = out.data() + (pr * cols + pc) * pp;
            for (std::int64_t dy = 0; dy < patch_size; ++dy) {
                std::int64_t y = pr * patch_size + dy;
                if (y >= image.height) break;  // zero padding below
                for (std::int64_t dx = 0; dx < patch_size; ++dx) {
                    std::int64_t x = pc * patch_size + dx;
                    if (x >= image.width) break;  // zero padding to the right
                    dst[dy * patch_size + dx] = image.at(y, x);
                }
            }
        }
    }
    return Tensor::from_data({n, pp}, std::move(out), Precision::f32);
}

VisionEncoder::VisionEncoder(VisionEncoderConfig cfg, RngState& rng, const std::string& prefix)
    : cfg_(cfg) {
    if (cfg_.patch_size < 1) throw std::invalid_argument("VisionEncoder: patch_size must be >= 1");
    if (cfg_.heads < 1 || cfg_.d_vision % cfg_.heads != 0) {
        throw std::invalid_argument("VisionEncoder: d_vision must be divisible by heads");
    }
    std::int64_t pp = cfg_.patch_size * cfg_.patch_size;
    patch_proj_ = make_linear(params_, prefix + ".patch_proj", pp, cfg_.d_vision, rng);
    pos_emb_ = params_.add(prefix + ".pos_emb",
                           Tensor::randn({max_patches(), cfg_.d_vision}, rng, 0.0, 0.02));
    for (int i = 0; i < cfg_.depth; ++i) {
        blocks_.push_back(
            make_block(params_, prefix + ".blocks." + std::to_string(i), cfg_.d_vision,
                       cfg_.heads, rng));
    }
    final_ln_ = make_layer_norm(params_, prefix + ".final_ln", cfg_.d_vision);
}

std::int64_t VisionEncoder::max_patches() const {
    std::int64_t per_edge = (cfg_.max_image_hw + cfg_.patch_size - 1) / cfg_.patch_size;
    return per_edge * per_edge;
}

ImageEmbedding VisionEncoder::encode(const GrayImage& image, const ForwardCtx& ctx) const {
    const GrayImage* input = &image;
    GrayImage resized;
    if (cfg_.resize_to_native && cfg_.native_resolution) {
        resized = resize_bilinear(image, *cfg_.native_resolution);
        input = &resized;
    }
    if (input->height > cfg_.max_image_hw || input->width > cfg_.max_image_hw) {
        throw std::invalid_argument("encode: image " + std::to_string(input->height) + "x" +
                                    std::to_string(input->width) + " exceeds configured maximum " +
                                    std::to_string(cfg_.max_image_hw));
    }
    Tensor patches = patchify(*input, cfg_.patch_size);
    std::int64_t n = patches.dim(0);
    Tensor x = add(matmul(patches, patch_proj_.weight), patch_proj_.bias);
    x = add(x, slice(pos_emb_, 0, 0, n));
    for (const auto& block : blocks_) x = block.forward(x, /*causal=*/false, ctx);
    x = final_ln_.forward(x);
    return ImageEmbedding{x, mean(x, 0)};
}

}  // namespace sarlv
