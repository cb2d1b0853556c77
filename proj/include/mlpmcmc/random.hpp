#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mlpmcmc {

/// SplitMix64 finalizer. Used only to expand and derive seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed `index` of `parent`. This is the only seed-splitting rule in
/// the library; every stream in a run hangs off the root seed through it.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(parent) ^ splitmix64(index ^ 0xd1b54a32d192ed03ULL));
}

/// xoshiro256** stream with a portable Gaussian sampler (Marsaglia polar).
/// Satisfies UniformRandomBitGenerator so it can also drive <random>
/// distributions, but the library itself only uses uniform() and normal()
/// so that draws are identical on every platform.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed) noexcept {
        std::uint64_t s = seed;
        for (auto& word : state_) {
            s = splitmix64(s);
            word = s;
        }
    }

    static Stream derived(std::uint64_t parent, std::uint64_t index) noexcept {
        return Stream(derive_seed(parent, index));
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal draw.
    double normal() noexcept;

    /// Fresh 64-bit seed for a sub-task (one particle filter run, one chain).
    std::uint64_t next_seed() noexcept { return (*this)(); }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mlpmcmc
