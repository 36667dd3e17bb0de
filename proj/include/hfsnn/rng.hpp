#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hfsnn {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t value) noexcept {
    return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

/// Stateless counter-based draw keyed by (seed, a, b, c). Lets parallel
/// kernels produce the same bits as a serial loop regardless of order.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                     std::uint64_t c) noexcept {
    return mix(mix(mix(seed, a), b), c);
}

/// Top 53 bits mapped to [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Named substream of a root seed ("encode", "init", "tpe", "strategy-random", ...).
std::uint64_t substream(std::uint64_t root, std::string_view name, std::uint64_t index = 0);

/// Sequential generator for code paths that are inherently ordered
/// (synthetic data, sampler draws, shuffles).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return to_unit(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t bits() { return engine_(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal() { return normal_(engine_); }
    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hfsnn
