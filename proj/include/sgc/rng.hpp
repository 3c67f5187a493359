// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace sgc {

/// SplitMix64 step. Used to expand a 64-bit seed into generator state and to
/// derive child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic child seed, e.g. one per parameter group or per resample epoch.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    std::uint64_t x = master ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    splitmix64(x);
    return splitmix64(x);
}

/// xoshiro256** seeded through SplitMix64.
///
/// Uniform doubles take the top 53 bits. Normal variates use the Box-Muller
/// transform on two uniforms; the second variate of each pair is cached. With
/// a given seed the stream is identical on every IEEE-754 platform with a
/// correctly rounded libm for log/cos/sin/sqrt.
class Rng {
public:
    using result_type = std::uint64_t;

    struct State {
        std::array<std::uint64_t, 4> s{};
        bool has_spare = false;
        double spare = 0.0;
        friend bool operator==(const State&, const State&) = default;
    };

    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& word : state_.s) word = splitmix64(x);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        auto& s = state_.s;
        const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1], safe for log.
    double uniform_open0() noexcept {
        return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) noexcept {
        if (n == 0) return 0;
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const auto product = static_cast<unsigned __int128>((*this)()) * n;
            if (static_cast<std::uint64_t>(product) >= threshold) {
                return static_cast<std::uint64_t>(product >> 64);
            }
        }
    }

    double normal() noexcept {
        if (state_.has_spare) {
            state_.has_spare = false;
            return state_.spare;
        }
        const double u1 = uniform_open0();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        state_.spare = radius * std::sin(angle);
        state_.has_spare = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    std::uint64_t seed() const noexcept { return seed_; }
    const State& state() const noexcept { return state_; }
    void restore(std::uint64_t seed, const State& state) noexcept {
        seed_ = seed;
        state_ = state;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    State state_;
};

} // namespace sgc
