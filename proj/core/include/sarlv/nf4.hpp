#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sarlv/tensor.hpp"

namespace sarlv {

/// The 16 NF4 codebook levels (normal-quantile code, published constants).
/// Strictly increasing, spanning [-1, 1], with an exact 0 at index 7.
const std::array<double, 16>& nf4_levels();

/// Blockwise 4-bit quantization: per block of `block_size` elements, values
/// are scaled by 1/absmax and snapped to the nearest codebook level. Immutable.
struct QuantizedTensor {
    std::vector<std::uint8_t> codes;  // two 4-bit indices per byte, low nibble first
    std::vector<float> absmax;        // one scale per block (1.0 for all-zero blocks)
    Shape shape;
    std::int64_t block_size = 64;

    std::int64_t count() const { return numel(shape); }
    /// Serialized payload size: codes + scales + fixed header fields.
    std::size_t byte_size() const { return codes.size() + 4 * absmax.size(); }
};

QuantizedTensor quantize_nf4(const Tensor& x, std::int64_t block_size = 64);

/// Exact inverse map: level[code] * absmax per element, stored at float32.
Tensor dequantize(const QuantizedTensor& q);

/// matmul(bf16_round(dequantize(q)), x), fused over blocks on the fly.
Tensor quantized_linear_forward(const QuantizedTensor& q, const Tensor& x);

/// Fixed field order: shape, block size, absmax array, code bytes.
void save_quantized(const std::filesystem::path& file, const QuantizedTensor& q);
QuantizedTensor load_quantized(const std::filesystem::path& file);

}  // namespace sarlv
