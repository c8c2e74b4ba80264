#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace bellhalo {

/// SplitMix64 finalizer; also used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Key for an independent stream, e.g. stream_key(master_seed, shot_id, Purpose::Source).
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

/// Counter-based generator: output i is mix64(key + i * golden). Any stream can
/// be reproduced from its key alone, independent of what other streams did.
/// Satisfies UniformRandomBitGenerator so <random> distributions work with it.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t key) noexcept : key_(key) {}
    Rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept : key_(stream_key(seed, a, b)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        return mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept {
        // Lemire's nearly-divisionless reduction; bias below 2^-64 * n is irrelevant here.
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (one value per call, no cached state).
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Number of failures before the first success, success probability p in (0, 1].
    std::uint64_t geometric(double p) noexcept {
        if (p >= 1.0) return 0;
        double u = uniform();
        while (u <= 0.0) u = uniform();
        const double g = std::floor(std::log(u) / std::log1p(-p));
        return g < 0x1.0p63 ? static_cast<std::uint64_t>(g) : std::uint64_t{1} << 63;
    }

    /// Poisson variate. Inversion for small means, normal approximation never used.
    std::uint64_t poisson(double mean) noexcept {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) {
            const double limit = std::exp(-mean);
            double prod = uniform();
            std::uint64_t k = 0;
            while (prod > limit) {
                prod *= uniform();
                ++k;
            }
            return k;
        }
        // Split large means into independent halves; exact since Poisson is additive.
        return poisson(mean / 2.0) + poisson(mean / 2.0);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace bellhalo
