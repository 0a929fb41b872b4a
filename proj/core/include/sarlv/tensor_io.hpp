#pragma once

#include <filesystem>
#include <string>

#include "sarlv/tensor.hpp"

namespace sarlv {

/// Writes <path>.bin (little-endian IEEE-754 float32, row-major) and a
/// <path>.json sidecar {name, shape, precision}. Values are rounded to
/// float32 on write; tensors trained at f32/bf16 round-trip exactly.
void save_tensor(const std::filesystem::path& path_stem, const std::string& name,
                 const Tensor& t);

/// Reads the pair written by save_tensor. The returned tensor carries the
/// sidecar's precision tag.
Tensor load_tensor(const std::filesystem::path& path_stem, std::string* name_out = nullptr);

/// FNV-1a hash of the .bin payload, as stored in checkpoint manifests.
std::uint64_t tensor_blob_hash(const Tensor& t);

}  // namespace sarlv
