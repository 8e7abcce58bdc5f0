#pragma once

// Counter-based random number generation. Output is a pure function of
// (seed, stream, draw index), so any draw can be reproduced exactly without
// replaying the sequence, and independent streams for parallel work are
// derived by hashing rather than by jumping a shared state.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace shapebridge {

namespace detail {

// SplitMix64 finalizer; full-avalanche 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t hash_triple(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t counter) {
    std::uint64_t h = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    h = mix64(h ^ (counter + 0x9e3779b97f4a7c15ULL));
    return mix64(h + counter);
}

}  // namespace detail

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t position() const { return counter_; }

    // Independent generator for sub-task `index` (path, batch, ...).
    CounterRng split(std::uint64_t index) const {
        std::uint64_t s = detail::mix64(stream_ + 0x9e3779b97f4a7c15ULL * (index + 1));
        return CounterRng(seed_, s ^ (index + 1));
    }

    std::uint64_t next_u64() { return detail::hash_triple(seed_, stream_, counter_++); }

    // Uniform in [0, 1), 53 significant bits.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; consumes two uniforms per pair and
    // caches the second variate.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Shift into (0, 1] so log() stays finite.
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace shapebridge
