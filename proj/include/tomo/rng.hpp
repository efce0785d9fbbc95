#pragma once

// Seeded, splittable random streams. Substreams are derived by hashing
// (master seed, stream indices) through splitmix64, so each (repetition,
// phase) pair samples from an independent, reproducible stream regardless
// of scheduling.

#include <cstdint>
#include <random>

namespace tomo::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a) {
    return splitmix64(master ^ splitmix64(a + 0x51ed2701ull));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

// mt19937_64 stream with explicit uint64->double conversion; avoids the
// implementation-defined behavior of std::uniform_real_distribution.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace tomo::rng
