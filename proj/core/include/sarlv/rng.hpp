#pragma once

#include <cstdint>
#include <string_view>

namespace sarlv {

/// Deterministic stream generator: xorshift64* over a splitmix-seeded state.
/// The same seed and call sequence produce the same stream on every platform;
/// `counter()` reports how many raw draws have been consumed.
class RngState {
public:
    explicit RngState(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);

    /// Box-Muller; consumes exactly two draws per call.
    double normal(double mean = 0.0, double stddev = 1.0);

    /// Unit-mean by default; consumes one draw.
    double exponential(double mean = 1.0);

    /// Unbiased index in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Derive an independent stream seed from a base seed, a tag, and an index.
    static std::uint64_t derive(std::uint64_t base, std::string_view tag,
                                std::uint64_t index = 0);

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    std::uint64_t counter_;
};

}  // namespace sarlv
