#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fracavg {

// Errors map onto CLI exit codes: config_error -> 2, numerical_error -> 3.
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Keyed stream: every (seed, a, b, c) tuple gets its own generator, so
// results never depend on evaluation order or worker count.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ a);
    k = splitmix64((k + 0x632be59bd9b4e019ULL) ^ b);
    k = splitmix64((k + 0x2545f4914f6cdd1dULL) ^ c);
    return k;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    return Rng(stream_key(seed, a, b, c));
}

}  // namespace fracavg
