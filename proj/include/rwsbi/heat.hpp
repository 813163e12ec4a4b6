#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rwsbi/kernel.hpp"

namespace rwsbi {

/// Parameters of d/dt rho_x = sum_y a_{x-y}(rho_y - rho_x) + gamma delta_0(x) e^{-alpha rho_0}.
/// sigma always comes from the kernel.
class HeatParams {
public:
    HeatParams(double gamma, double alpha, JumpKernel kernel);

    double gamma() const noexcept { return gamma_; }
    double alpha() const noexcept { return alpha_; }
    const JumpKernel& kernel() const noexcept { return kernel_; }
    double sigma() const noexcept { return kernel_.sigma(); }

private:
    double gamma_;
    double alpha_;
    JumpKernel kernel_;
};

struct SolveOptions {
    double t_max = 0.0;
    /// Lattice truncation |x| <= radius; nullopt picks default_radius(...).
    std::optional<std::int64_t> radius;
    /// Local error target per step and the allowed boundary leak.
    double tol = 1e-8;
    double radius_factor = 8.0;
    /// Times at which the full lattice profile is stored (t_max is always added).
    std::vector<double> record_times;
    /// Upper bound on the step, as a multiple of 1/(total jump rate).
    double max_step_factor = 0.5;
    std::uint64_t max_steps = 50'000'000;
};

/// Time-stepped solution. Scalars are stored at every accepted step, full
/// profiles only at record times.
class RhoSolution {
public:
    const HeatParams& params() const noexcept { return params_; }
    std::int64_t radius() const noexcept { return radius_; }
    double tol() const noexcept { return tol_; }
    double t_max() const noexcept { return times_.back(); }
    const std::string& dt_policy() const noexcept { return dt_policy_; }
    double boundary_leak() const noexcept { return leak_; }
    std::uint64_t steps_accepted() const noexcept { return accepted_; }
    std::uint64_t steps_rejected() const noexcept { return rejected_; }

    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> rho0_series() const noexcept { return rho0_; }
    std::span<const double> r_sum_series() const noexcept { return r_sum_; }
    std::span<const double> r_integral_series() const noexcept { return r_int_; }

    /// rho_0(t) on [0, t_max], monotone cubic Hermite between steps using the
    /// stored time derivative.
    double rho0(double t) const;
    /// gamma int_0^t e^{-alpha rho_0}, interpolated the same way.
    double r_integral(double t) const;

    std::span<const double> record_times() const noexcept { return record_times_; }
    /// Full profile rho_x(t), x = -radius..radius, at a record time.
    std::span<const double> profile(double t) const;
    bool has_profile(double t) const noexcept;

private:
    friend RhoSolution solve_rho(const HeatParams&, const SolveOptions&);
    explicit RhoSolution(HeatParams p) : params_(std::move(p)) {}
    std::size_t locate(double t) const;

    HeatParams params_;
    std::int64_t radius_ = 0;
    double tol_ = 0.0;
    double leak_ = 0.0;
    std::string dt_policy_;
    std::uint64_t accepted_ = 0;
    std::uint64_t rejected_ = 0;
    std::vector<double> times_;
    std::vector<double> rho0_;
    std::vector<double> drho0_;
    std::vector<double> r_sum_;
    std::vector<double> r_int_;
    std::vector<double> record_times_;
    std::vector<std::vector<double>> profiles_;
};

RhoSolution solve_rho(const HeatParams& params, const SolveOptions& options);
RhoSolution solve_rho(const HeatParams& params, double t_max, std::optional<std::int64_t> radius,
                      double tol);

/// Default truncation radius: ceil(factor sigma sqrt(t_max)), enlarged if a
/// Bernstein tail bound for `mass` total mass at that radius exceeds tol/10.
std::int64_t default_radius(const JumpKernel& kernel, double t_max, double factor = 8.0, double tol = 1e-8,
                            double mass = 1.0);

/// Second, independent route to rho_0: product-trapezoid marching of the
/// Volterra equation rho_0(t) = gamma int_0^t p_0(t-s) e^{-alpha rho_0(s)} ds
/// with p_0 from the Fourier route, Richardson-extrapolated over h and h/2.
/// Returns rho_0 at t = 0, h, 2h, ..., t_max.
struct VolterraSolution {
    double h = 0.0;
    std::vector<double> rho0;
    double at(double t) const;
};
VolterraSolution solve_rho0_volterra(const HeatParams& params, double t_max, double h = 0.05);

/// Max over sample times of |rho_0(t) - gamma int_0^t p_0(t-s) e^{-alpha rho_0(s)} ds|,
/// p_0 by uniformization.
double duhamel_residual(const RhoSolution& solution, std::span<const double> sample_times);

struct MassReport {
    double t = 0.0;
    double sum_form = 0.0;
    double integral_form = 0.0;
    double discrepancy() const noexcept { return sum_form - integral_form; }
};
/// R(t) at a record time (sum form from the stored profile).
MassReport total_mass(const RhoSolution& solution, double t);
/// Max |R_sum - R_integral| over all accepted steps.
double max_mass_discrepancy(const RhoSolution& solution);

/// (1/alpha)[1/2 log t - log log t + log(sqrt(2 pi) gamma alpha / sigma)], t > e.
double asymptotic_rho0(double t, const HeatParams& params);
/// (sigma/alpha) sqrt(2/pi) sqrt(t) log t, t > 1.
double asymptotic_R(double t, const HeatParams& params);

/// 1 - Phi(|y|).
double tilde_rho(double y);
/// (1/2pi) int_0^1 (s(1-s))^{-1/2} e^{-y^2/(2s)} ds by adaptive quadrature
/// after the substitution s = sin^2(theta).
double tilde_rho_integral(double y);

struct ProfileSample {
    double t = 0.0;
    std::vector<double> y;
    std::vector<double> scaled;  // rho_{[sigma sqrt(t) y]}(t) / log t
    double sup_distance = 0.0;   // max |scaled - tilde_rho(y)|
};
ProfileSample rescaled_profile(const RhoSolution& solution, double t, std::span<const double> y_grid);

enum class SolutionKind { Sub, Super };

struct SubSuperPoint {
    double t = 0.0;
    double f = 0.0;     // left-hand side f(t)
    double rhs = 0.0;   // int_0^t gamma p_0(t-s) e^{-f(s)} ds
    bool holds = false; // f < rhs (sub) or f > rhs (super)
};

struct SubSuperVerdict {
    SolutionKind kind{};
    double C = 0.0;
    double K = 0.0;
    double K_prime = 0.0;  // level of the super candidate on [0, K)
    std::vector<SubSuperPoint> points;
    bool all_hold() const noexcept;
};

/// Candidate f(t) = 1/2 log t - log log t + C on [K, inf) (alpha = 1).
/// Sub: f = -1 on [0, K). Super: f = K' (a level, not a time) on [0, K).
class SubSuperChecker {
public:
    SubSuperChecker(const HeatParams& params, double t_max);
    double threshold() const noexcept;  // log(sqrt(2 pi) gamma / sigma)
    SubSuperVerdict check(double C, double K, double K_prime, SolutionKind kind,
                          std::span<const double> t_grid) const;
    /// First K on a geometric scan (and, for super, the first level K' from
    /// f(K) upward) for which the inequality holds at every grid point. The
    /// grid is log-uniform on [K, t_max] plus a few points in (0, K).
    SubSuperVerdict scan(double C, SolutionKind kind, std::size_t grid_points = 60) const;

private:
    double candidate(double s, double C, double K, double K_prime, SolutionKind kind) const;

    HeatParams params_;
    double t_max_;
    ReturnProbabilityTable p0_;
};

SubSuperVerdict check_sub_supersolution(const HeatParams& params, double C, double K, double K_prime,
                                        SolutionKind kind, std::span<const double> t_grid);

/// Log-uniform grid of n points on [a, b].
std::vector<double> log_grid(double a, double b, std::size_t n);

}  // namespace rwsbi
