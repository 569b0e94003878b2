#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace dnahnet {

using Rng = std::mt19937_64;

// 53-bit uniform in [0, 1), independent of the standard library's
// distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Index drawn from unnormalised non-negative weights.
inline std::size_t sample_index(Rng& rng, std::span<const double> weights) {
    double total = 0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return weights.size() - 1;
}

// Box-Muller standard normal.
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Normal truncated to +-2 standard deviations by rejection.
inline double truncated_normal(Rng& rng, double stddev) {
    for (;;) {
        const double z = standard_normal(rng);
        if (std::abs(z) <= 2.0) return z * stddev;
    }
}

}  // namespace dnahnet
