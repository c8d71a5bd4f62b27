#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace feddwa {

// Counter-based pseudo-random generation. Every draw is a pure function of a
// 64-bit key and a counter, so generated data is independent of evaluation
// order and stable across platforms for a fixed build.

constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rng_key(std::uint64_t seed, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
    return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

inline double uniform_from_bits(std::uint64_t bits) {
    // 53 top bits -> [0, 1)
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double keyed_uniform(std::uint64_t key, std::uint64_t counter) {
    return uniform_from_bits(mix64(key ^ mix64(counter)));
}

inline double keyed_normal(std::uint64_t key, std::uint64_t counter) {
    const double u1 = keyed_uniform(key, 2 * counter);
    const double u2 = keyed_uniform(key, 2 * counter + 1);
    const double r = std::sqrt(-2.0 * std::log(u1 > 0.0 ? u1 : 0x1.0p-60));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential view over the keyed generator, for draws without a natural
// per-element index (shuffles, Dirichlet sampling, weight init).
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }
    double uniform() { return uniform_from_bits(next_u64()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1 > 0.0 ? u1 : 0x1.0p-60));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    // index in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace feddwa
