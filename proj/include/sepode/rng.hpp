#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sepode {

namespace detail {

// splitmix64 step; used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Deterministic counter-derived random stream (xoshiro256++ core).
///
/// All distributions are generated from explicit arithmetic on the raw
/// 64-bit output, so sequences are identical across standard libraries and
/// platforms. Streams derived from distinct (seed, a, b) triples are
/// statistically independent for Monte-Carlo purposes.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t st = seed;
        for (auto& word : s_) word = detail::splitmix64(st);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    /// Derive an independent substream, e.g. (master_seed, rep_index, purpose).
    static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
        std::uint64_t st = seed;
        st = detail::splitmix64(st) ^ (a * 0x9e3779b97f4a7c15ull);
        st = detail::splitmix64(st) ^ (b * 0xbf58476d1ce4e5b9ull);
        return Rng(detail::splitmix64(st));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

private:
    std::array<std::uint64_t, 4> s_{};
};

/// Stream purpose tags; keeping noise, guess, and auxiliary draws on
/// separate substreams means changing one knob (e.g. the prior CV) cannot
/// shift the values drawn for anything else.
enum class StreamTag : std::uint64_t {
    noise = 1,
    nl_guess = 2,
    l_guess = 3,
    aux = 4,
};

inline Rng make_stream(std::uint64_t seed, std::uint64_t index, StreamTag tag) {
    return Rng::stream(seed, index, static_cast<std::uint64_t>(tag));
}

}  // namespace sepode
