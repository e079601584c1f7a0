#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bcx {

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

// Stafford variant 13 mixer used by SplitMix64.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// One SplitMix64 step from `state`: mix(state + gamma).
constexpr std::uint64_t splitmix64(std::uint64_t state) noexcept {
    return splitmix64_mix(state + golden_gamma);
}

// Per-sample seed: SplitMix64 output for state global_seed ^ (index * gamma).
// derive_seed(0, 0) == 0xE220A8397B1DCDAF.
constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index) noexcept {
    return splitmix64(global_seed ^ (index * golden_gamma));
}

// Counter-based generator (SplitMix64 stream). All draws are defined bit-for-bit
// here so that datasets do not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept {
        state_ += golden_gamma;
        return splitmix64_mix(state_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n) by rejection; n > 0.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Standard normal by Box-Muller; the second variate is discarded to keep
    // the stream position independent of call history.
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace bcx
