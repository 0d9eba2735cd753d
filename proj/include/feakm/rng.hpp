#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace feakm {

// splitmix64 step; used to derive independent seeds from a base seed so that
// per-trial / per-agent streams never alias.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = base;
    std::uint64_t out = splitmix64(s);
    s ^= a * 0xD6E8FEB86659FD93ULL;
    out ^= splitmix64(s);
    s ^= b * 0xCA5A826395121157ULL;
    out ^= splitmix64(s);
    s ^= c * 0x9E3779B97F4A7C15ULL;
    out ^= splitmix64(s);
    return out;
}

// Seedable RNG with explicit state. The generator is std::mt19937_64, whose
// output sequence is pinned by the standard, and all conversions below avoid
// std::*_distribution (implementation-defined), so streams are reproducible
// across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], rejection-sampled to stay unbiased.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1u;
        if (range == 0) return static_cast<std::int64_t>(gen_());  // full span
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % range);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (cosine branch). Two uniforms per draw,
    // fixed consumption keeps streams aligned.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace feakm
