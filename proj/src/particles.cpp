#include "rwsbi/particles.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "rwsbi/errors.hpp"
#include "rwsbi/stats.hpp"

namespace rwsbi {

void Occupancy::grow_to(std::int64_t x) {
    if (counts_.empty()) {
        offset_ = x - 32;
        counts_.assign(65, 0);
        return;
    }
    const std::int64_t lo = offset_;
    const std::int64_t hi = offset_ + static_cast<std::int64_t>(counts_.size()) - 1;
    const std::int64_t width = hi - lo + 1;
    const std::int64_t new_lo = x < lo ? std::min(x, lo - width) : lo;
    const std::int64_t new_hi = x > hi ? std::max(x, hi + width) : hi;
    std::vector<std::uint32_t> grown(static_cast<std::size_t>(new_hi - new_lo + 1), 0);
    std::copy(counts_.begin(), counts_.end(), grown.begin() + (lo - new_lo));
    counts_.swap(grown);
    offset_ = new_lo;
}

std::uint32_t Occupancy::add(std::int64_t x) {
    std::int64_t i = x - offset_;
    if (counts_.empty() || i < 0 || i >= static_cast<std::int64_t>(counts_.size())) {
        grow_to(x);
        i = x - offset_;
    }
    ++total_;
    return ++counts_[static_cast<std::size_t>(i)];
}

std::uint32_t Occupancy::remove(std::int64_t x) {
    const std::int64_t i = x - offset_;
    if (i < 0 || i >= static_cast<std::int64_t>(counts_.size()) || counts_[static_cast<std::size_t>(i)] == 0)
        throw RangeError("Occupancy: removing from an empty site");
    --total_;
    return --counts_[static_cast<std::size_t>(i)];
}

std::vector<std::pair<std::int64_t, std::uint32_t>> Occupancy::sparse() const {
    std::vector<std::pair<std::int64_t, std::uint32_t>> out;
    for (std::size_t i = 0; i < counts_.size(); ++i)
        if (counts_[i] != 0) out.emplace_back(offset_ + static_cast<std::int64_t>(i), counts_[i]);
    return out;
}

std::size_t ParticleSystem::add(std::int64_t x) {
    positions_.push_back(x);
    occ_.add(x);
    return positions_.size() - 1;
}

void ParticleSystem::move(std::size_t particle, std::int64_t to) {
    auto& p = positions_.at(particle);
    occ_.remove(p);
    occ_.add(to);
    p = to;
}

void ParticleSystem::remove(std::size_t particle) {
    occ_.remove(positions_.at(particle));
    positions_[particle] = positions_.back();
    positions_.pop_back();
}

bool ParticleSystem::consistent() const {
    Occupancy fresh;
    for (auto x : positions_) fresh.add(x);
    return fresh.sparse() == occ_.sparse() && occ_.total() == positions_.size();
}

void VacancyTracker::occupy(double t) {
    if (finished_) throw RangeError("VacancyTracker: record already finished");
    if (!open_) return;
    if (t > open_start_) intervals_.emplace_back(open_start_, t);
    open_ = false;
}

void VacancyTracker::vacate(double t) {
    if (finished_) throw RangeError("VacancyTracker: record already finished");
    if (open_) return;
    open_ = true;
    open_start_ = t;
}

void VacancyTracker::finish(double T) {
    if (finished_) return;
    if (open_) occupy(T);
    open_ = false;
    finished_ = true;
    horizon_ = T;
    prefix_.assign(intervals_.size() + 1, 0.0);
    for (std::size_t i = 0; i < intervals_.size(); ++i)
        prefix_[i + 1] = prefix_[i] + (intervals_[i].second - intervals_[i].first);
}

double VacancyTracker::vacant_before(double t) const {
    // measure of vacancy within [0, t]
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), t,
                               [](double v, const std::pair<double, double>& iv) { return v < iv.first; });
    const auto k = static_cast<std::size_t>(it - intervals_.begin());
    if (k == 0) return 0.0;
    const auto& last = intervals_[k - 1];
    return prefix_[k - 1] + (std::min(t, last.second) - last.first);
}

double VacancyTracker::vacant_time(double s, double t) const {
    if (!finished_) throw RangeError("VacancyTracker: query before finish()");
    if (!(0.0 <= s && s <= t && t <= horizon_))
        throw RangeError("vacant_time: need 0 <= s <= t <= T (T = " + std::to_string(horizon_) + ")");
    if (s == t) return 0.0;
    return vacant_before(t) - vacant_before(s);
}

double vacant_time(const VacancyTracker& tracker, double s, double t) { return tracker.vacant_time(s, t); }

Rho0Source Rho0Source::from_solution(std::shared_ptr<const RhoSolution> solution) {
    if (!solution) throw DomainError("Rho0Source: null solution");
    Rho0Source s;
    s.solution_ = std::move(solution);
    return s;
}

Rho0Source Rho0Source::asymptotic(const HeatParams& params) {
    Rho0Source s;
    s.params_ = params;
    return s;
}

double Rho0Source::operator()(double t) const {
    if (solution_) return solution_->rho0(t);
    const double e2 = std::exp(2.0);
    return std::max(0.0, asymptotic_rho0(std::max(t, e2), *params_));
}

double Rho0Source::covers_until() const noexcept {
    return solution_ ? solution_->t_max() : std::numeric_limits<double>::infinity();
}

ImmigrationSchedule ImmigrationSchedule::constant(double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("ImmigrationSchedule: gamma must be >= 0");
    ImmigrationSchedule s;
    s.gamma_ = gamma;
    return s;
}

ImmigrationSchedule ImmigrationSchedule::tuned(Sign sign, double epsilon, double gamma, Rho0Source rho0) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("ImmigrationSchedule: epsilon must be in [0, 1)");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("ImmigrationSchedule: gamma must be >= 0");
    ImmigrationSchedule s;
    s.gamma_ = gamma;
    s.epsilon_ = epsilon;
    s.sign_ = sign;
    s.rho0_ = std::move(rho0);
    return s;
}

double ImmigrationSchedule::rate(double t) const {
    if (!rho0_) return gamma_;
    return factor() * gamma_ * std::exp(-(*rho0_)(t));
}

std::pair<double, double> ImmigrationSchedule::envelope_block(double t) const {
    const double inf = std::numeric_limits<double>::infinity();
    if (!rho0_) return {0.0, inf};
    if (t < 1.0) return {0.0, 1.0};
    const double start = std::exp2(std::floor(std::log2(t)));
    // guard against log2 rounding at exact powers of two
    if (start > t) return {start / 2, start};
    if (2 * start <= t) return {2 * start, 4 * start};
    return {start, 2 * start};
}

double ImmigrationSchedule::envelope(double t) const {
    if (!rho0_) return gamma_;
    return rate(envelope_block(t).first);
}

double ImmigrationSchedule::integrated_rate(double a, double b) const {
    if (!rho0_) return gamma_ * (b - a);
    double s = 0.0;
    const double piece = 1.0;
    for (double x = a; x < b; x += piece) {
        const double y = std::min(b, x + piece);
        s += boost::math::quadrature::gauss<double, 20>::integrate([this](double u) { return rate(u); }, x, y);
    }
    return s;
}

double ImmigrationSchedule::covers_until() const noexcept {
    return rho0_ ? rho0_->covers_until() : std::numeric_limits<double>::infinity();
}

const ParticleSystem& SimulationResult::snapshot_at(double t) const {
    for (const auto& s : snapshots)
        if (s.time() == t) return s;
    throw RangeError("SimulationResult: no snapshot at requested time");
}

namespace {

// Shared event engine. `blocking` selects RWSBI attempts (rate gamma, success
// iff the origin is empty) versus thinned Poisson arrivals.
SimulationResult run_engine(const ImmigrationSchedule& schedule, bool blocking, const JumpKernel& kernel, double T,
                            RngStream stream, const SimulationOptions& options) {
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("simulation: T must be > 0");
    if (schedule.covers_until() < T) throw DomainError("simulation: rho_0 source does not cover [0, T]");
    Rng rng = stream.engine();

    SimulationResult res;
    res.T = T;
    if (options.record_log) res.log.emplace();

    std::vector<double> snaps;
    for (double s : options.snapshot_times) {
        if (s < 0.0 || s > T) throw DomainError("simulation: snapshot time outside [0, T]");
        snaps.push_back(s);
    }
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
    if (snaps.empty() || snaps.back() != T) snaps.push_back(T);

    ParticleSystem sys;
    double t = 0.0;
    std::size_t next_snap = 0;
    std::uint64_t events = 0;
    double last_rate = std::numeric_limits<double>::infinity();

    auto take_snapshots_until = [&](double upto) {
        while (next_snap < snaps.size() && snaps[next_snap] <= upto) {
            ParticleSystem copy = sys;
            copy.set_time(snaps[next_snap]);
            res.snapshots.push_back(std::move(copy));
            ++next_snap;
        }
    };
    auto origin_changed = [&](double when, std::uint32_t count) {
        if (res.log) res.log->origin_changes.push_back({when, count});
    };
    take_snapshots_until(0.0);

    auto [block_start, block_end] = schedule.envelope_block(0.0);
    double env = blocking ? schedule.gamma() : schedule.envelope(0.0);

    while (t < T) {
        const double n = static_cast<double>(sys.count_total());
        const double total = n + env;
        const double boundary = std::min(T, block_end);
        const double dt = total > 0.0 ? rng.exponential(total) : std::numeric_limits<double>::infinity();
        if (t + dt >= boundary) {
            t = boundary;
            take_snapshots_until(t);
            if (t >= T) break;
            std::tie(block_start, block_end) = schedule.envelope_block(t);
            env = schedule.envelope(t);
            continue;
        }
        t += dt;
        take_snapshots_until(std::nextafter(t, -1.0));
        if (++events > options.event_cap)
            throw EventCapExceeded("simulation: event cap " + std::to_string(options.event_cap) + " exceeded");

        const double r = rng.uniform() * total;
        if (r < n) {
            const auto i = std::min(static_cast<std::size_t>(r), sys.count_total() - 1);
            const std::int64_t from = sys.positions()[i];
            const std::int64_t to = from + kernel.sample(rng);
            ++res.jumps;
            if (to != from) {
                sys.move(i, to);
                if (from == 0) {
                    const auto c = sys.occupancy(0);
                    origin_changed(t, c);
                    if (c == 0) res.vacancy.vacate(t);
                } else if (to == 0) {
                    const auto c = sys.occupancy(0);
                    origin_changed(t, c);
                    if (c == 1) res.vacancy.occupy(t);
                }
            }
            if (res.log) res.log->events.push_back({t, EventKind::Jump, i, from, to});
            continue;
        }
        if (blocking) {
            ++res.attempts;
            if (sys.occupancy(0) == 0) {
                const auto id = sys.add(0);
                ++res.successes;
                res.vacancy.occupy(t);
                origin_changed(t, 1);
                if (res.log) res.log->events.push_back({t, EventKind::ImmigrationSuccess, id, 0, 0});
            } else {
                ++res.blocked;
                if (res.log) res.log->events.push_back({t, EventKind::ImmigrationBlocked, 0, 0, 0});
            }
            continue;
        }
        const double rate = schedule.rate(t);
        if (rate > env * (1.0 + 1e-12))
            throw EnvelopeViolation("simulation: rate " + std::to_string(rate) + " exceeds envelope " +
                                    std::to_string(env) + " at t = " + std::to_string(t));
        if (rate > last_rate) res.rate_nonincreasing = false;
        last_rate = rate;
        if (rng.uniform() * env < rate) {
            const auto id = sys.add(0);
            ++res.attempts;
            ++res.successes;
            const auto c = sys.occupancy(0);
            if (c == 1) res.vacancy.occupy(t);
            origin_changed(t, c);
            if (res.log) res.log->events.push_back({t, EventKind::ImmigrationSuccess, id, 0, 0});
        }
    }
    take_snapshots_until(T);
    res.vacancy.finish(T);
    return res;
}

}  // namespace

SimulationResult simulate_rwsbi(double gamma, const JumpKernel& kernel, double T, RngStream rng,
                                const SimulationOptions& options) {
    return run_engine(ImmigrationSchedule::constant(gamma), true, kernel, T, rng, options);
}

SimulationResult simulate_poisson_system(const ImmigrationSchedule& schedule, const JumpKernel& kernel, double T,
                                         RngStream rng, const SimulationOptions& options) {
    if (!schedule.is_tuned()) throw DomainError("simulate_poisson_system: schedule must be Tuned");
    return run_engine(schedule, false, kernel, T, rng, options);
}

ReplayReport replay_log(const EventLog& log, double T) {
    ReplayReport rep;
    ParticleSystem sys;
    std::size_t next_change = 0;
    auto check_change = [&](double t) {
        if (next_change >= log.origin_changes.size() || log.origin_changes[next_change].time != t ||
            log.origin_changes[next_change].count != sys.occupancy(0))
            rep.consistent = false;
        ++next_change;
    };
    for (const auto& e : log.events) {
        switch (e.kind) {
            case EventKind::ImmigrationSuccess: {
                if (sys.occupancy(0) > 0) ++rep.blocking_violations;
                if (e.particle != sys.count_total()) rep.consistent = false;
                sys.add(0);
                if (sys.occupancy(0) == 1) rep.vacancy.occupy(e.time);
                check_change(e.time);
                break;
            }
            case EventKind::ImmigrationBlocked:
                if (sys.occupancy(0) == 0) rep.consistent = false;
                break;
            case EventKind::Jump: {
                if (e.particle >= sys.count_total() || sys.positions()[e.particle] != e.from) {
                    rep.consistent = false;
                    break;
                }
                if (e.from == e.to) break;
                sys.move(e.particle, e.to);
                if (e.from == 0) {
                    if (sys.occupancy(0) == 0) rep.vacancy.vacate(e.time);
                    check_change(e.time);
                } else if (e.to == 0) {
                    if (sys.occupancy(0) == 1) rep.vacancy.occupy(e.time);
                    check_change(e.time);
                }
                break;
            }
        }
    }
    if (next_change != log.origin_changes.size()) rep.consistent = false;
    rep.vacancy.finish(T);
    rep.final_count = sys.count_total();
    return rep;
}

VacancyMoments vacancy_moment_experiment(double epsilon, double s, double t, int k, std::size_t replicas,
                                         std::uint64_t seed, const HeatParams& params,
                                         std::shared_ptr<const RhoSolution> rho) {
    if (!(t / 2 <= s && s < t)) throw DomainError("vacancy_moment_experiment: need t/2 <= s < t");
    if (k < 2 || k % 2 != 0) throw DomainError("vacancy_moment_experiment: k must be even and >= 2");
    if (replicas < 2) throw DomainError("vacancy_moment_experiment: need at least 2 replicas");
    const auto schedule = ImmigrationSchedule::tuned(Sign::Minus, epsilon, params.gamma(), Rho0Source::from_solution(rho));
    VacancyMoments m;
    m.epsilon = epsilon;
    m.s = s;
    m.t = t;
    m.k = k;
    m.values = run_replicas(replicas, [&](std::size_t r) {
        const auto res = simulate_poisson_system(schedule, params.kernel(), t, RngStream{seed, r});
        return res.vacancy.vacant_time(s, t);
    });
    const auto agg = aggregate_replicas(m.values);
    m.mean = agg.mean;
    m.mean_stderr = agg.std_error;
    m.variance = agg.variance;
    std::vector<double> powers(m.values.size());
    for (std::size_t i = 0; i < m.values.size(); ++i) powers[i] = std::pow(m.values[i] - m.mean, k);
    m.centered_moment = aggregate_replicas(powers).mean;
    m.ratio = m.centered_moment / std::pow(m.mean, k);
    const double a = (1.0 + epsilon) / 2.0;  // 1 - (1 - eps)/2
    m.intermediate_bound = (std::pow(t, a) - std::pow(s, a)) / a;
    double expected = 0.0;
    for (double x = s; x < t; x += 1.0) {
        const double y = std::min(t, x + 1.0);
        expected += boost::math::quadrature::gauss<double, 20>::integrate(
            [&](double u) { return std::exp(-(1.0 - epsilon) * rho->rho0(u)); }, x, y);
    }
    m.expected_mean = expected;
    return m;
}

double profile_estimator(const ParticleSystem& snapshot, const std::function<double(double)>& f, double t,
                         double sigma) {
    if (!(t > std::numbers::e)) throw DomainError("profile_estimator: requires t > e");
    const double scale = sigma * std::sqrt(t);
    double s = 0.0;
    for (const auto& [x, c] : snapshot.occupancy_map().sparse()) s += static_cast<double>(c) * f(static_cast<double>(x) / scale);
    return s / (scale * std::log(t));
}

}  // namespace rwsbi
