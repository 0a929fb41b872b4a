#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sarlv {

constexpr std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64(const void* data, std::size_t n);

/// Lowercase 16-digit hex rendering, used in checkpoint manifests.
std::string hex64(std::uint64_t v);

}  // namespace sarlv
