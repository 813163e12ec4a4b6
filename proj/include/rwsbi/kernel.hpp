#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rwsbi/rng.hpp"

namespace rwsbi {

struct Jump {
    std::int64_t displacement = 0;
    double probability = 0.0;
};

/// Finite-support jump kernel a_x on Z with mean 0 and variance sigma2 > 0.
/// Only obtainable through validate_kernel, so every instance is valid.
class JumpKernel {
public:
    std::span<const Jump> jumps() const noexcept { return jumps_; }
    double sigma2() const noexcept { return sigma2_; }
    double sigma() const noexcept { return sigma_; }
    std::int64_t max_jump() const noexcept { return max_jump_; }
    bool is_symmetric() const noexcept { return symmetric_; }
    /// Support contained in {-1, 0, 1}.
    bool is_nearest_neighbour() const noexcept { return max_jump_ == 1; }
    double probability(std::int64_t x) const noexcept;
    /// Characteristic function phi(k) = sum a_x cos(kx) (real part; the
    /// imaginary part is returned through `imag`).
    double characteristic(double k, double* imag = nullptr) const noexcept;
    std::string describe() const;

    std::int64_t sample(Rng& rng) const noexcept;

private:
    friend JumpKernel validate_kernel(std::span<const Jump> raw);

    std::vector<Jump> jumps_;      // sorted by displacement, zero entries dropped
    std::vector<double> cumulative_;
    double sigma2_ = 0.0;
    double sigma_ = 0.0;
    std::int64_t max_jump_ = 0;
    bool symmetric_ = false;
};

/// Validates a raw (displacement, probability) list. Duplicate displacements
/// are merged. Throws NotAProbability, NonZeroMean or NonFiniteVariance.
JumpKernel validate_kernel(std::span<const Jump> raw);

/// The symmetric simple random walk: +-1 with probability 1/2.
JumpKernel ssrw();

/// Parses the kernel text format: one `offset probability` pair per line,
/// `#` starts a comment.
JumpKernel parse_kernel(std::string_view text);

/// Loads a kernel from a file path, or the builtin name "ssrw".
JumpKernel load_kernel(const std::string& path_or_name);

/// Draws a displacement from the kernel.
std::int64_t sample_jump(const JumpKernel& kernel, Rng& rng);

/// p_x(t) for x in [min_x, min_x + values.size()).
struct TransitionTable {
    double t = 0.0;
    double truncation_tol = 0.0;
    std::int64_t min_x = 0;
    std::vector<double> values;
    /// Poisson truncation window [n_lo, n_hi] actually used.
    std::uint64_t n_lo = 0;
    std::uint64_t n_hi = 0;

    double at(std::int64_t x) const noexcept;
    std::int64_t max_x() const noexcept {
        return min_x + static_cast<std::int64_t>(values.size()) - 1;
    }
    double total() const noexcept;
};

/// Poisson(t) weights w_n for n in [lo, hi] such that the omitted mass on
/// both sides is at most tol. Computed in log space from the mode outward.
struct PoissonWindow {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    std::vector<double> weights;  // weights[n - lo]
};
PoissonWindow poisson_window(double t, double tol);

/// Transition probabilities by uniformization: p(t) = sum_n e^{-t} t^n/n! a^{*n}.
TransitionTable transition_probability(const JumpKernel& kernel, double t, double tol = 1e-10);

/// Return probability p_0(u) of the continuous-time walk for u in [0, u_max].
///
/// Uniformization: precomputes c_n = a^{*n}(0) and sums Poisson-weighted
/// terms; cost grows like u_max^2 at construction, meant for u_max <= ~1e4.
/// Fourier: trapezoid rule on (1/2pi) int exp(-u(1 - phi(k))) dk. The M-point
/// rule equals sum_m p_{mM}(u) exactly, so M is chosen from a tail bound.
class ReturnProbability {
public:
    enum class Method { Uniformization, Fourier };

    ReturnProbability(const JumpKernel& kernel, double u_max, Method method, double tol = 1e-13);

    double operator()(double u) const { return value(u); }
    double value(double u) const;
    /// d/du p_0(u).
    double derivative(double u) const;
    double u_max() const noexcept { return u_max_; }
    Method method() const noexcept { return method_; }

private:
    std::size_t fourier_points(double u) const;

    Method method_;
    double u_max_;
    double tol_;
    double sigma2_;
    std::int64_t max_jump_;
    // Uniformization data: c_n and c_{n+1} - c_n.
    std::vector<double> c_;
    // Fourier data: g_j = 1 - phi(2 pi j / M_max), j = 0..M_max-1.
    std::vector<double> g_;
};

/// Cubic Hermite table of p_0(u) on [0, u_max], fine uniform spacing on
/// [0, 16] and geometric spacing above. Relative interpolation error is
/// below ~1e-9 for u >= 16.
class ReturnProbabilityTable {
public:
    ReturnProbabilityTable(const JumpKernel& kernel, double u_max);
    double operator()(double u) const;
    double u_max() const noexcept { return u_max_; }

private:
    double u_max_;
    std::vector<double> nodes_;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

}  // namespace rwsbi
