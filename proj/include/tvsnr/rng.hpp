// rng.hpp — small counter-seeded PRNG for reproducible Monte Carlo. Streams
// are derived from (master seed, stream index), so a batch of trajectories
// gets statistically independent noise regardless of scheduling order.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tvsnr {

namespace detail {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

struct rng_stream {
    std::uint64_t state = 0x853C49E6748FEA9BULL;
    double spare = 0.0;
    bool has_spare = false;

    static rng_stream from_seed(std::uint64_t seed, std::uint64_t stream = 0) {
        rng_stream r;
        r.state = detail::mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
        return r;
    }

    std::uint64_t next_u64() {
        state += 0x9E3779B97F4A7C15ULL;
        return detail::mix64(state);
    }

    // uniform on the open interval (0, 1)
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare = r * std::sin(theta);
        has_spare = true;
        return r * std::cos(theta);
    }
};

}  // namespace tvsnr
