#ifndef UAVLAB_RNG_HPP
#define UAVLAB_RNG_HPP

#include <cstdint>

namespace uavlab {

// Counter-based generator built on the SplitMix64 finalizer. Every draw is a
// pure function of (seed, counter), so independently seeded streams can be
// reproduced in any language from the constants below. Identifier stored in
// dataset/trajectory headers: "splitmix64-ctr".
inline constexpr const char* kRngId = "splitmix64-ctr";

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derives an independent child seed from (master, index).
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return splitmix64(seed_ + counter_++ * 0x9E3779B97F4A7C15ULL); }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace uavlab

#endif
