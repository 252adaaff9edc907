#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace modbe {

__extension__ using uint128 = unsigned __int128;

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Folds a sequence of words into a single stream key.
constexpr std::uint64_t derive_key(std::uint64_t seed) noexcept { return mix64(seed); }

template <typename... Rest>
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t first, Rest... rest) noexcept {
    return derive_key(mix64(seed ^ mix64(first + 0x632be59bd9b4e019ULL)), static_cast<std::uint64_t>(rest)...);
}

/// Counter-based random stream. The i-th draw is a pure function of (key, i),
/// so streams derived from (seed, step, sample) never depend on how many
/// draws other streams consumed or on the order in which they run.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    template <typename... Words>
    static constexpr CounterRng keyed(std::uint64_t seed, Words... words) noexcept {
        return CounterRng(derive_key(seed, static_cast<std::uint64_t>(words)...));
    }

    constexpr std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const uint128 m = static_cast<uint128>(next_u64()) * bound;
            if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    /// Standard normal via Box-Muller (one variate per call; the sine branch is discarded).
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace modbe
