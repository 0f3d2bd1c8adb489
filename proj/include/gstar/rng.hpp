#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gstar {

// Seeded RNG used everywhere randomness is required. Wraps std::mt19937_64
// (fixed by the standard, so sequences are reproducible across platforms)
// and derives all variates from raw engine words rather than from
// distribution objects, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Independent substream: mixes (seed, stream) through splitmix64.
    static Rng stream(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

    std::uint64_t word() { return eng_(); }

    int bit() { return static_cast<int>(eng_() & 1u); }

    // Uniform in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double log_uniform(double a, double b) {
        return a * std::exp(uniform() * std::log(b / a));
    }

    // Box-Muller without caching, so draws stay reproducible.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Uniform integer in [lo, hi] by rejection.
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t w = eng_();
        while (w >= limit) w = eng_();
        return lo + static_cast<std::int64_t>(w % span);
    }

private:
    std::mt19937_64 eng_;
};

} // namespace gstar
