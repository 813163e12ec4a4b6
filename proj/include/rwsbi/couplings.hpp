#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "rwsbi/heat.hpp"
#include "rwsbi/kernel.hpp"
#include "rwsbi/particles.hpp"
#include "rwsbi/rng.hpp"

namespace rwsbi {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Markovian coupling of X (started at x) and Y for a symmetric kernel.
///
/// Nearest-neighbour kernels with odd X - Y wait for the first jump of either
/// walk (ParityWait), then mirror. Otherwise the walks mirror (Y jumps by the
/// negative of X's jump) until they meet or cross, then move independently
/// until they meet (success) or X sits at 0 (failure). Meeting is checked
/// first, so meeting at the origin is a success.
class CoupledPair {
public:
    enum class Phase : std::uint8_t { ParityWait, Mirror, Independent, Coupled, Failed };

    CoupledPair(std::int64_t x, std::int64_t y, const JumpKernel& kernel);

    std::int64_t x() const noexcept { return x_; }
    std::int64_t y() const noexcept { return y_; }
    Phase phase() const noexcept { return phase_; }
    bool resolved() const noexcept { return phase_ == Phase::Coupled || phase_ == Phase::Failed; }
    /// Y has its own clock only while not mirroring.
    bool y_clock_active() const noexcept { return phase_ == Phase::ParityWait || phase_ == Phase::Independent; }

    void x_jumps(std::int64_t j);
    void y_jumps(std::int64_t j);
    /// Sum of jumps applied as one block; the caller guarantees no phase
    /// change can occur inside it.
    void shift(std::int64_t dx, std::int64_t dy);

private:
    void update();

    std::int64_t x_;
    std::int64_t y_;
    Phase phase_;
    bool nearest_neighbour_;
    int mirror_sign_ = 0;
};

struct PathPoint {
    double t = 0.0;
    std::int64_t x = 0;
    std::int64_t y = 0;
};

struct CouplingOutcome {
    bool success = false;
    double coupling_time = kInfinity;
    /// First time X is at 0: the failure time, the coupling time if they
    /// met at 0, the followed hitting time when requested, otherwise +inf.
    double hit_time_origin = kInfinity;
    std::optional<std::vector<PathPoint>> paths;
    std::uint64_t jumps = 0;   // individual jump events simulated
    std::uint64_t chunks = 0;  // blocks of jumps sampled at once
};

struct CouplingOptions {
    bool record_paths = false;     // disables chunking so every jump is recorded
    bool follow_to_origin = false; // after success, run X until it hits 0
    std::uint64_t max_iterations = 2'000'000'000;
    std::uint64_t chunk_threshold = 32;
};

/// Runs the pair from (x0, 0) at time 0 until resolved. Throws
/// KernelNotSymmetric, DomainError for x0 = 0, EventCapExceeded.
CouplingOutcome reflection_couple(std::int64_t x0, const JumpKernel& kernel, RngStream rng,
                                  const CouplingOptions& options = {});

/// Advances a pair in isolation until it resolves; returns elapsed time.
/// Blocks of L jumps are sampled at once (multinomial displacement, Gamma(L)
/// duration) whenever no stopping event can occur within them.
double run_pair_to_resolution(CoupledPair& pair, const JumpKernel& kernel, Rng& rng, const CouplingOptions& options,
                              std::vector<PathPoint>* path = nullptr, double t0 = 0.0,
                              std::uint64_t* jumps = nullptr, std::uint64_t* chunks = nullptr);

/// Sum of L independent kernel jumps, exact (multinomial counts).
std::int64_t sample_jump_sum(const JumpKernel& kernel, std::uint64_t L, Rng& rng);

/// Time for a single walk from x != 0 to first hit 0 (exact, chunked).
double first_hit_origin(std::int64_t x, const JumpKernel& kernel, Rng& rng, std::uint64_t max_iterations);

struct SuccessEstimate {
    std::int64_t x0 = 0;
    std::size_t replicas = 0;
    std::size_t successes = 0;
    double estimate = 0.0;
    double std_error = 0.0;
    /// Property (ii): covariance of the success indicator with the increment
    /// X(tau_0 + h) - X(tau_0) and with its square, in standard errors.
    double increment_horizon = 0.0;
    double cov_increment = 0.0;
    double cov_increment_se = 0.0;
    double cov_square = 0.0;
    double cov_square_se = 0.0;
    bool independence_ok = true;
};

SuccessEstimate coupling_success_prob(std::int64_t x0, const JumpKernel& kernel, std::size_t replicas,
                                      std::uint64_t seed, double horizon = 16.0);

/// Block schedule t_{3n} = eps^2 n^2 / log(n v 3)^2 with
/// t_{3n+1} - t_{3n} = t_{3n+2} - t_{3n+1} = min(eps^2 (n+1)^{1-eps/2}, (t_{3n+3} - t_{3n})/3).
struct TimeGrid {
    double epsilon = 0.0;
    std::size_t n_max = 0;
    std::vector<double> t;        // t_0 .. t_{3 n_max}
    std::vector<bool> repaired;   // per n = 0 .. n_max-1: the min took the second argument

    double block_end(std::size_t n) const { return t.at(3 * n); }
    /// #{n >= 1 : t_{3n} <= s}
    std::size_t blocks_completed_by(double s) const;
};

TimeGrid build_time_grid(double epsilon, std::size_t n_max);
/// Unrepaired t_{3n}.
double raw_block_start(double epsilon, std::size_t n);
/// #{n >= 1: t_{3n} <= t} * 2 eps / (sqrt t log t).
double block_count_ratio(const TimeGrid& grid, double t);

/// Counts of the three systems of the upper coupling.
struct TripleSystemState {
    double t = 0.0;
    ParticleSystem eta;
    ParticleSystem eta_tilde;
    ParticleSystem eta_hat;
    /// For eta particle i: (true if partner is a tilde particle else hat, index in that system).
    std::vector<std::pair<bool, std::size_t>> pairing;
};

struct UpperCouplingResult {
    std::vector<TripleSystemState> snapshots;  // sorted snapshot times, plus T
    std::uint64_t domination_checks = 0;
    std::uint64_t hat_additions = 0;
    std::uint64_t eta_additions = 0;
    std::uint64_t attempts = 0;
    double tilde_vacant_time = 0.0;  // V~_{0,T} of the (+eps) system
    std::uint64_t events = 0;
};

/// Throws DominationViolated if eta_x > eta~_x + eta^_x at any event time.
UpperCouplingResult simulate_upper_coupling(double epsilon, double gamma, const JumpKernel& kernel, double T,
                                            RngStream rng, std::shared_ptr<const RhoSolution> rho,
                                            const std::vector<double>& snapshot_times = {});

struct LowerBlockRecord {
    std::size_t n = 0;
    bool t_hat_finite = false;
    bool t_tilde_finite = false;
    bool e_n = false;
    std::uint64_t m_tilde = 0;          // tilde arrivals in I''_n
    double expected_m_tilde = 0.0;      // int over I''_n of beta^{(-eps)}
    std::uint64_t eta_total = 0;        // at t_{3n}
    std::uint64_t hat_total = 0;        // at t_{3n}
    std::uint64_t cum_e = 0;            // sum_{j <= n} 1{E_j}
};

struct LowerCouplingResult {
    TimeGrid grid;
    std::vector<LowerBlockRecord> blocks;
    std::uint64_t property_d_checks = 0;
    std::uint64_t property_d_violations = 0;
    std::uint64_t inequality_violations = 0;  // blocks with eta_total < hat_total or hat_total < cum_e
    std::uint64_t events = 0;
};

/// Lower-bound block scheme (Markovian variant). Requires a symmetric kernel.
LowerCouplingResult simulate_lower_coupling(double epsilon, double gamma, const JumpKernel& kernel,
                                            std::size_t n_max, RngStream rng,
                                            std::shared_ptr<const RhoSolution> rho);

}  // namespace rwsbi
