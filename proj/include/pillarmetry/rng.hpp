#pragma once

#include <cmath>
#include <cstdint>

namespace pillarmetry {

/// splitmix64 finalizer; bijective on uint64.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

/// Derives an independent stream seed from a base seed and a salt.
/// Used to give every image, structure and noise pass of a scene its own
/// stream, so that output does not depend on traversal or thread order.
constexpr std::uint64_t derive_stream_seed(std::uint64_t base, std::uint64_t salt) noexcept {
    return mix64(base + 0x9E3779B97F4A7C15ULL * (salt + 1));
}

/// Per-structure seed from a global scene seed and the structure's lattice
/// index. Deterministic; distinct indices map to distinct seeds for any
/// lattice of practical size (exhaustively tested for 100x100).
constexpr std::uint64_t derive_structure_seed(std::uint64_t global_seed, int grid_i, int grid_j) noexcept {
    std::uint64_t s = mix64(global_seed ^ 0x9E6C63D0876A9A7FULL);
    s = mix64(s + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(static_cast<std::int64_t>(grid_i)));
    s = mix64(s + 0xC2B2AE3D27D4EB4FULL * static_cast<std::uint64_t>(static_cast<std::int64_t>(grid_j)));
    return s;
}

/// Small deterministic PRNG (splitmix64 stream) with uniform and Gaussian
/// draws. The toolkit does not use std::normal_distribution because its
/// output is implementation-defined; reproducibility of generated scenes is
/// part of the contract.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform01() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller; caches the second variate.
    double normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace pillarmetry
