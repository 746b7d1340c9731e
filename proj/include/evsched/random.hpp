#pragma once

#include <cstdint>

namespace evsched {

/// Independent sources of randomness within one stage.
enum class StreamSource : std::uint64_t {
    Grid = 0x67726964,
    Demand = 0x64656d61,
    Arrivals = 0x61727276,
    Initial = 0x696e6974,
    Sampling = 0x73616d70,
};

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

/// Counter-based splitmix64 stream. A stream keyed by (seed, stage, source)
/// is a pure function of those three values, so two rollouts that visit the
/// same stage with the same seed see the same draws from each source, no
/// matter how many draws other sources or earlier stages consumed.
class RandomStream {
public:
    explicit constexpr RandomStream(std::uint64_t key) : state_(key) {}
    constexpr RandomStream(std::uint64_t seed, std::int64_t stage, StreamSource source)
        : state_(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(stage)), static_cast<std::uint64_t>(source))) {}

    constexpr std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    constexpr double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [lo, hi], unbiased (rejection sampling).
    constexpr std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span);
        std::uint64_t r = next_u64();
        while (r >= limit) r = next_u64();
        return lo + static_cast<std::int64_t>(r % span);
    }

    [[nodiscard]] constexpr std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace evsched
