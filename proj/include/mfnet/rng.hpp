#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace mfnet {

/// SplitMix64 in counter form: draw n is mix(seed + n * golden_gamma), so a
/// stream is fully described by (seed, counter) and is identical on every
/// platform.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() noexcept { return mix(seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept
    {
        const auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    friend bool operator==(const CounterRng&, const CounterRng&) = default;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Deterministic child seed, e.g. derive_seed(base, {M, replica}).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept
{
    std::uint64_t s = CounterRng::mix(base ^ 0x6A09E667F3BCC909ULL);
    for (auto p : path) s = CounterRng::mix(s ^ CounterRng::mix(p + 0x9E3779B97F4A7C15ULL));
    return s;
}

} // namespace mfnet
