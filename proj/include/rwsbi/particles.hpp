#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rwsbi/heat.hpp"
#include "rwsbi/kernel.hpp"
#include "rwsbi/rng.hpp"

namespace rwsbi {

/// Site counts on a dense window that grows on demand.
class Occupancy {
public:
    std::uint32_t count(std::int64_t x) const noexcept {
        const std::int64_t i = x - offset_;
        return (i >= 0 && i < static_cast<std::int64_t>(counts_.size())) ? counts_[static_cast<std::size_t>(i)] : 0;
    }
    /// Returns the count after the increment.
    std::uint32_t add(std::int64_t x);
    /// Returns the count after the decrement. The site must be occupied.
    std::uint32_t remove(std::int64_t x);
    /// Nonzero sites in increasing order.
    std::vector<std::pair<std::int64_t, std::uint32_t>> sparse() const;
    std::uint64_t total() const noexcept { return total_; }

private:
    void grow_to(std::int64_t x);

    std::int64_t offset_ = 0;
    std::vector<std::uint32_t> counts_;
    std::uint64_t total_ = 0;
};

/// Positions of live particles (index = particle id, in order of arrival)
/// with the matching occupancy.
class ParticleSystem {
public:
    double time() const noexcept { return t_; }
    void set_time(double t) noexcept { t_ = t; }
    std::size_t count_total() const noexcept { return positions_.size(); }
    std::span<const std::int64_t> positions() const noexcept { return positions_; }
    std::uint32_t occupancy(std::int64_t x) const noexcept { return occ_.count(x); }
    const Occupancy& occupancy_map() const noexcept { return occ_; }

    std::size_t add(std::int64_t x);
    void move(std::size_t particle, std::int64_t to);
    /// Removes a particle by swapping the last one into its slot.
    void remove(std::size_t particle);

    /// Recomputes occupancy from positions and compares.
    bool consistent() const;

private:
    double t_ = 0.0;
    std::vector<std::int64_t> positions_;
    Occupancy occ_;
};

enum class EventKind : std::uint8_t { ImmigrationSuccess, ImmigrationBlocked, Jump };

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::Jump;
    std::uint64_t particle = 0;  // for Jump and ImmigrationSuccess
    std::int64_t from = 0;
    std::int64_t to = 0;
};

struct OriginChange {
    double time = 0.0;
    std::uint32_t count = 0;
};

struct EventLog {
    std::vector<Event> events;
    std::vector<OriginChange> origin_changes;
};

/// Zero set of the origin occupancy, as disjoint ordered intervals. The
/// system starts empty, so the origin is vacant from time 0.
class VacancyTracker {
public:
    VacancyTracker() = default;

    void occupy(double t);
    void vacate(double t);
    /// Closes the record at horizon T.
    void finish(double T);

    bool vacant_now() const noexcept { return open_; }
    double horizon() const noexcept { return horizon_; }
    std::span<const std::pair<double, double>> intervals() const noexcept { return intervals_; }
    /// Lebesgue measure of vacancy within [s, t]; requires 0 <= s <= t <= T.
    double vacant_time(double s, double t) const;

private:
    double vacant_before(double t) const;

    bool open_ = true;
    double open_start_ = 0.0;
    double horizon_ = 0.0;
    bool finished_ = false;
    std::vector<std::pair<double, double>> intervals_;
    std::vector<double> prefix_;  // prefix_[i] = total length of intervals_[0..i)
};

double vacant_time(const VacancyTracker& tracker, double s, double t);

/// Where a tuned schedule gets rho_0(t).
class Rho0Source {
public:
    static Rho0Source from_solution(std::shared_ptr<const RhoSolution> solution);
    /// max(0, asymptotic_rho0(max(t, e^2))): the printed asymptotic formula,
    /// clamped where it is undefined or negative.
    static Rho0Source asymptotic(const HeatParams& params);

    double operator()(double t) const;
    /// Largest t the source is valid for.
    double covers_until() const noexcept;

private:
    std::shared_ptr<const RhoSolution> solution_;
    std::optional<HeatParams> params_;
};

enum class Sign { Plus, Minus };

/// Immigration rate at the origin: Constant(gamma) or Tuned(+-eps):
/// beta(t) = (1 +- eps) gamma e^{-rho_0(t)}.
class ImmigrationSchedule {
public:
    static ImmigrationSchedule constant(double gamma);
    static ImmigrationSchedule tuned(Sign sign, double epsilon, double gamma, Rho0Source rho0);

    bool is_tuned() const noexcept { return rho0_.has_value(); }
    double gamma() const noexcept { return gamma_; }
    double epsilon() const noexcept { return epsilon_; }
    Sign sign() const noexcept { return sign_; }
    double factor() const noexcept { return sign_ == Sign::Plus ? 1.0 + epsilon_ : 1.0 - epsilon_; }

    double rate(double t) const;
    /// Envelope block [start, end) containing t: [0,1), [1,2), [2,4), ...
    std::pair<double, double> envelope_block(double t) const;
    /// Piecewise-constant majorant: the rate at the block's left endpoint.
    double envelope(double t) const;
    /// Integral of the rate over [a, b] (Gauss-Legendre on the stored rho_0).
    double integrated_rate(double a, double b) const;
    double covers_until() const noexcept;

private:
    double gamma_ = 0.0;
    double epsilon_ = 0.0;
    Sign sign_ = Sign::Plus;
    std::optional<Rho0Source> rho0_;
};

struct SimulationOptions {
    std::vector<double> snapshot_times;
    bool record_log = false;
    std::uint64_t event_cap = std::uint64_t{1} << 32;
};

struct SimulationResult {
    double T = 0.0;
    std::vector<ParticleSystem> snapshots;  // one per snapshot time (sorted), plus T
    std::optional<EventLog> log;
    VacancyTracker vacancy;
    std::uint64_t attempts = 0;   // immigration attempts (RWSBI) or accepted arrivals (Poisson)
    std::uint64_t successes = 0;
    std::uint64_t blocked = 0;
    std::uint64_t jumps = 0;
    /// Tuned runs: every rate evaluation was <= the previous one.
    bool rate_nonincreasing = true;
    const ParticleSystem& final_state() const { return snapshots.back(); }
    const ParticleSystem& snapshot_at(double t) const;
};

SimulationResult simulate_rwsbi(double gamma, const JumpKernel& kernel, double T, RngStream rng,
                                const SimulationOptions& options = {});

SimulationResult simulate_poisson_system(const ImmigrationSchedule& schedule, const JumpKernel& kernel, double T,
                                         RngStream rng, const SimulationOptions& options = {});

struct ReplayReport {
    std::uint64_t blocking_violations = 0;  // successes while the origin was occupied
    bool consistent = true;                 // positions and origin record agree with the events
    VacancyTracker vacancy;
    std::uint64_t final_count = 0;
};
/// Replays a log from the empty configuration up to T.
ReplayReport replay_log(const EventLog& log, double T);

struct VacancyMoments {
    double epsilon = 0.0;
    double s = 0.0;
    double t = 0.0;
    int k = 0;
    std::vector<double> values;      // per-replica V_{s,t}
    double mean = 0.0;
    double mean_stderr = 0.0;
    double variance = 0.0;           // unbiased
    double centered_moment = 0.0;    // (1/n) sum (V - mean)^k
    double ratio = 0.0;              // centered_moment / mean^k
    double intermediate_bound = 0.0; // int_s^t u^{-(1-eps)/2} du
    double expected_mean = 0.0;      // int_s^t e^{-(1-eps) rho_0(u)} du
};

/// Moments of the vacant time V_{s,t} of the (-eps) tuned Poisson system.
VacancyMoments vacancy_moment_experiment(double epsilon, double s, double t, int k, std::size_t replicas,
                                         std::uint64_t seed, const HeatParams& params,
                                         std::shared_ptr<const RhoSolution> rho);

/// sum_x eta_x f(x / (sigma sqrt t)) / (sigma sqrt t log t).
double profile_estimator(const ParticleSystem& snapshot, const std::function<double(double)>& f, double t,
                         double sigma);

}  // namespace rwsbi
