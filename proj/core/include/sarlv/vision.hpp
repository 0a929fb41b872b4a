#pragma once

#include <cstdint>
#include <optional>

#include "sarlv/image.hpp"
#include "sarlv/nn.hpp"

namespace sarlv {

struct VisionEncoderConfig {
    std::int64_t patch_size = 14;
    std::int64_t d_vision = 64;
    int depth = 2;
    int heads = 4;
    /// Largest accepted image edge; also sizes the position table.
    std::int64_t max_image_hw = 336;
    /// When set and resize_to_native is on, inputs are resampled to this edge
    /// before patching. Off by default: images are zero-padded instead.
    std::optional<std::int64_t> native_resolution;
    bool resize_to_native = false;
};

/// Zero-pad bottom/right to the next multiple of the patch size, then split
/// row-major into ceil(H/P)*ceil(W/P) flattened P*P patch vectors.
Tensor patchify(const GrayImage& image, std::int64_t patch_size);

struct ImageEmbedding {
    Tensor patches;  // [n_patches, d_vision]
    Tensor pooled;   // [d_vision], mean over patches (for contrastive alignment)
};

class VisionEncoder {
public:
    VisionEncoder(VisionEncoderConfig cfg, RngState& rng, const std::string& prefix = "vision");

    ImageEmbedding encode(const GrayImage& image, const ForwardCtx& ctx) const;

    const VisionEncoderConfig& config() const { return cfg_; }
    ParamRegistry& params() { return params_; }
    const ParamRegistry& params() const { return params_; }
    std::int64_t max_patches() const;

private:
    VisionEncoderConfig cfg_;
    ParamRegistry params_;
    Linear patch_proj_;
    Tensor pos_emb_;
    std::vector<TransformerBlock> blocks_;
    LayerNormParams final_ln_;
};

}  // namespace sarlv
