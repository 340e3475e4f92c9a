#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "lda/special.hpp"

namespace lda {

// splitmix64 finalizer; used to derive well-separated seeds from a master
// seed and a path of task indices, so that adding or removing parallelism
// never changes which stream a logical task consumes.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Stable module identifiers for stream derivation (never reorder).
enum class StreamDomain : std::uint64_t {
    Aggregate = 1,
    Fit = 2,
    Bayes = 3,
    Dependence = 4,
    Capital = 5,
    Cli = 6,
};

// A deterministic random stream. Every sampling routine receives one by
// reference; one uniform is consumed per variate (inversion sampling) so
// results are reproducible across platforms and thread counts. Substreams
// derive from the stream's construction seed, not its evolving state.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

    static RngStream derive(std::uint64_t master, StreamDomain d,
                            std::initializer_list<std::uint64_t> path = {}) {
        std::uint64_t s = mix_seed(splitmix64(master), static_cast<std::uint64_t>(d));
        for (std::uint64_t p : path) s = mix_seed(s, p);
        return RngStream(s);
    }

    RngStream substream(std::uint64_t idx) const { return RngStream(mix_seed(seed_, idx)); }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t raw() { return eng_(); }

    // Uniform on (0,1): 53-bit mantissa, zero excluded.
    double uniform() {
        for (;;) {
            const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
            if (u > 0.0) return u;
        }
    }

    double normal() { return norm_ppf(uniform()); }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

} // namespace lda
