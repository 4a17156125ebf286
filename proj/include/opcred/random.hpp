#pragma once

// Counter-derived random substreams. Every (seed, cell, path, purpose)
// tuple maps to its own SplitMix64 sequence, so simulation results do not
// depend on how paths are scheduled across threads.

#include <cmath>
#include <cstdint>
#include <limits>

namespace opcred {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class StreamPurpose : std::uint64_t {
    LowFrequencyCount = 1,
    LowFrequencySeverity = 2,
    HighFrequencyCount = 3,
    HighFrequencySeverity = 4,
    Synthesis = 5,
};

class Substream {
public:
    using result_type = std::uint64_t;

    explicit Substream(std::uint64_t state) : state_(state) {}

    static Substream derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b, StreamPurpose purpose) {
        std::uint64_t h = mix64(seed);
        h = mix64(h ^ a);
        h = mix64(h ^ b);
        h = mix64(h ^ static_cast<std::uint64_t>(purpose));
        return Substream(h);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Poisson(mean) by inversion of the CDF at u in (0, 1). The result is
/// nondecreasing in both u and mean.
std::int64_t poisson_inverse(double mean, double u);

/// Pareto above `threshold` with tail `tail` by inversion: L * u^(-1/tail).
inline double pareto_inverse(double threshold, double tail, double u) { return threshold * std::pow(u, -1.0 / tail); }

}  // namespace opcred
