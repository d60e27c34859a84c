#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace glpe {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic RNG. mt19937_64 has a standard-mandated output sequence and
// the double/int conversions below are hand-rolled, so streams are portable
// across compilers and standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n), unbiased
    long uniform_int(long n) {
        const uint64_t bound = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<long>(r % bound);
    }

    void fill_uniform(std::span<double> v, double lo, double hi) {
        for (double& x : v) x = uniform(lo, hi);
    }

    // Independent child stream; pure function of (seed, tag), so deriving the
    // same tag twice yields the same stream.
    Rng derive(uint64_t tag) const { return Rng(splitmix64(seed_ ^ splitmix64(tag))); }

    uint64_t seed() const { return seed_; }

  private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace glpe
