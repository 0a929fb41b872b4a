#include "sarlv/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "sarlv/hash.hpp"

namespace sarlv {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

RngState::RngState(std::uint64_t seed) : seed_(seed), counter_(0) {
    state_ = splitmix64(seed);
    if (state_ == 0) state_ = 0x6a09e667f3bcc909ull;  // xorshift state must be nonzero
}

std::uint64_t RngState::next_u64() {
    // Marsaglia xorshift64*, multiplier from the published variant.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    ++counter_;
    return x * 0x2545f4914f6cdd1dull;
}

double RngState::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngState::normal(double mean, double stddev) {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    return mean + stddev * r * std::cos(theta);
}

double RngState::exponential(double mean) {
    return -mean * std::log1p(-uniform());
}

std::uint64_t RngState::uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
    // Lemire multiply-shift; single draw, fixed consumption.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

std::uint64_t RngState::derive(std::uint64_t base, std::string_view tag,
                               std::uint64_t index) {
    std::uint64_t h = fnv1a64(tag);
    return splitmix64(base ^ splitmix64(h ^ splitmix64(index)));
}

}  // namespace sarlv
