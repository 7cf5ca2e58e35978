#pragma once

#include <cstdint>
#include <span>

namespace mmcc::rng {

// splitmix64 finalizer; bijective 64-bit mix.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based substream: the state is derived by hashing an arbitrary
// key tuple, so any (seed, domain, sweep, period, path, step) segment is
// reproducible in isolation without advancing a global generator.
class Stream {
public:
    explicit Stream(std::uint64_t s) : state_(mix(s ^ 0x6a09e667f3bcc909ULL)) {}

    template <typename... K>
    static Stream keyed(std::uint64_t seed, K... keys) {
        std::uint64_t h = mix(seed);
        ((h = mix(h ^ static_cast<std::uint64_t>(keys))), ...);
        return Stream(h);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in (0, 1)
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; pairs are cached.
    double next_normal();

    void fill_normal(std::span<double> out) {
        for (double& x : out) x = next_normal();
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Domain tags keep independent uses of the same seed decorrelated.
enum Domain : std::uint64_t {
    kInit = 0x11,     // parameter initialization
    kSweepSim = 0x22, // sweep-opening full simulation (prefix cache)
    kTrain = 0x33,    // fresh suffix shocks per Adam step
    kEval = 0x44,     // fixed common-random-number evaluation set
    kOracle = 0x55,
    kTest = 0x66,
};

} // namespace mmcc::rng
