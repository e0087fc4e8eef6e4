#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mgv {

// Deterministic PRNG used everywhere randomness is needed. xoshiro256**
// seeded through splitmix64, with one independent stream per named consumer
// so adding a consumer does not perturb the draws of the others.
class Rng {
  public:
    Rng() : Rng(1, "default") {}

    Rng(uint64_t seed, std::string_view stream) {
        uint64_t x = seed ^ fnv1a(stream);
        for (auto& word : state_) word = splitmix64(x);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

    // Standard normal via Box-Muller; self-contained so results do not
    // depend on the standard library's distribution implementation.
    double gaussian() {
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static uint64_t fnv1a(std::string_view s) {
        uint64_t h = 0xCBF29CE484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ull;
        }
        return h;
    }

  private:
    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    uint64_t state_[4];
};

}  // namespace mgv
