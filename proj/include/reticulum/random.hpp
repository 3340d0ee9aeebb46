#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>

namespace reticulum {

/// PCG32 (XSH-RR output, 64-bit LCG state) after O'Neill, "PCG: A Family of
/// Simple Fast Space-Efficient Statistically Good Algorithms".
///
/// All derived variates (uniform doubles, normals, bounded integers) are
/// computed here rather than through <random> distributions, whose algorithms
/// are implementation-defined. Streams are therefore identical across
/// standard libraries for a given seed.
class Pcg32 {
public:
    using result_type = std::uint32_t;

    explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bULL,
                   std::uint64_t stream = 0xda3e39cb94b95bdbULL) {
        seed_stream(seed, stream);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t old = state_;
        state_ = old * kMultiplier + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = (*this)();
        return (hi << 32) | (*this)();
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1).
    double uniform_open() {
        double u = 0.0;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via the Box-Muller transform; the second variate of
    /// each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Unbiased integer on [0, bound) by rejection (bound > 0).
    std::uint32_t below(std::uint32_t bound) {
        const std::uint32_t threshold = (-bound) % bound;
        for (;;) {
            const std::uint32_t r = (*this)();
            if (r >= threshold) return r % bound;
        }
    }

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = below(static_cast<std::uint32_t>(i));
            using std::swap;
            swap(values[i - 1], values[j]);
        }
    }

private:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;

    void seed_stream(std::uint64_t seed, std::uint64_t stream) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        (*this)();
        state_ += seed;
        (*this)();
    }

    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace reticulum
