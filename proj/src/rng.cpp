#include "rwsbi/rng.hpp"

#include <cmath>

namespace rwsbi {

Rng RngStream::engine() const noexcept {
    SplitMix64 sm(mix64(seed) ^ mix64(stream_id + 0xD1B54A32D192ED03ULL));
    std::array<std::uint64_t, 4> s{};
    for (auto& w : s) w = sm.next();
    if ((s[0] | s[1] | s[2] | s[3]) == 0) s[0] = 1;
    return Rng(s);
}

__extension__ using u128 = unsigned __int128;

std::uint64_t Rng::below(std::uint64_t n) noexcept {
    u128 m = static_cast<u128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            m = static_cast<u128>((*this)()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::exponential(double rate) noexcept { return -std::log(uniform_open()) / rate; }

double Rng::normal() noexcept {
    // Marsaglia polar method; the second variate is discarded so the engine
    // carries no hidden state.
    for (;;) {
        const double u = 2.0 * uniform() - 1.0;
        const double v = 2.0 * uniform() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

double Rng::gamma(double shape) noexcept {
    if (shape < 1.0) {
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_open();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double Rng::beta(double a, double b) noexcept {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
}

std::uint64_t Rng::binomial(std::uint64_t n, double p) noexcept {
    // Order-statistic recursion (Knuth, TAOCP 3.4.1): exact, O(log n) beta draws.
    std::uint64_t acc = 0;
    while (n > 0 && p > 0.0) {
        if (p >= 1.0) return acc + n;
        if (n <= 32) {
            for (std::uint64_t i = 0; i < n; ++i) acc += uniform() < p ? 1 : 0;
            return acc;
        }
        const std::uint64_t a = 1 + n / 2;
        const std::uint64_t b = n + 1 - a;
        const double x = beta(static_cast<double>(a), static_cast<double>(b));
        if (x < p) {
            acc += a;
            n -= a;
            p = (p - x) / (1.0 - x);
        } else {
            n = a - 1;
            p = p / x;
        }
    }
    return acc;
}

std::uint64_t Rng::poisson(double mean) noexcept {
    // Inversion for small means; above that the gamma-order-statistic split
    // (Ahrens-Dieter style) reduces the mean until inversion applies.
    std::uint64_t acc = 0;
    while (mean >= 30.0) {
        const auto m = static_cast<std::uint64_t>(std::floor(0.875 * mean));
        const double g = gamma(static_cast<double>(m));
        if (g > mean) return acc + binomial(m - 1, mean / g);
        acc += m;
        mean -= g;
    }
    if (mean <= 0.0) return acc;
    double p = std::exp(-mean);
    double cdf = p;
    const double u = uniform();
    std::uint64_t k = 0;
    while (u >= cdf) {
        ++k;
        p *= mean / static_cast<double>(k);
        const double next = cdf + p;
        if (next == cdf) break;
        cdf = next;
    }
    return acc + k;
}

}  // namespace rwsbi
