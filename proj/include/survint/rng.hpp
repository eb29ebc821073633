#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace survint {

// splitmix64 step (Vigna). Used for seed derivation only.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream labels so independent random consumers never share a stream.
enum class Stream : std::uint64_t {
    population_cell = 1,
    big_data = 2,
    sample_single = 3,
    sample_dual = 4,
    sample_cutoff = 5,
    hot_deck = 6,
    generic = 7,
};

// Splittable seed derivation: chains splitmix64 over (master, stream, index).
// Every replicate/cell gets its own stream, so results do not depend on
// scheduling or thread count.
inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64_next(s);
    s ^= static_cast<std::uint64_t>(stream);
    h ^= splitmix64_next(s);
    s ^= index;
    h ^= splitmix64_next(s);
    return h;
}

// mt19937_64 engine with explicit, portable distribution transforms. The
// standard library leaves distribution algorithms implementation-defined;
// spelling them out keeps output bit-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1); never returns 0 so it is safe under log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller without caching: two uniforms per draw, no carried state.
    double normal() {
        double u1 = uniform_open();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double mean) { return -mean * std::log(uniform_open()); }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer on [0, n) via rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace survint
