#pragma once

#include <array>
#include <cstdint>

namespace rwsbi {

/// SplitMix64 (Steele, Lea, Flood 2014). Used only to seed Rng.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Finalizer of SplitMix64 applied to a single word.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** with the distribution samplers used across the library.
/// All samplers are written here rather than taken from <random> so that a
/// given (seed, stream_id) produces the same draws with any standard library.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(const std::array<std::uint64_t, 4>& state) noexcept : s_(state) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    /// Uniform on (0, 1).
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }
    /// Uniform integer in [0, n), Lemire's multiply-shift with rejection. n > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

    double exponential(double rate = 1.0) noexcept;
    double normal() noexcept;
    /// Gamma(shape, 1), shape > 0 (Marsaglia-Tsang).
    double gamma(double shape) noexcept;
    double beta(double a, double b) noexcept;
    std::uint64_t binomial(std::uint64_t n, double p) noexcept;
    std::uint64_t poisson(double mean) noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

    const std::array<std::uint64_t, 4>& state() const noexcept { return s_; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_;
};

/// Descriptor of an independent random stream. The engine state is a pure
/// function of (seed, stream_id).
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    Rng engine() const noexcept;
    /// Stream for a sub-task (e.g. replica r), distinct from this stream and
    /// from substreams of other ids.
    RngStream substream(std::uint64_t k) const noexcept {
        return RngStream{seed, mix64(stream_id * 0x9E3779B97F4A7C15ULL + k + 1)};
    }
};

}  // namespace rwsbi
