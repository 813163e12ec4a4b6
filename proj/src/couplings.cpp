#include "rwsbi/couplings.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rwsbi/errors.hpp"
#include "rwsbi/stats.hpp"

namespace rwsbi {

namespace {

int sign_of(std::int64_t v) { return (v > 0) - (v < 0); }

}  // namespace

CoupledPair::CoupledPair(std::int64_t x, std::int64_t y, const JumpKernel& kernel)
    : x_(x), y_(y), phase_(Phase::Mirror), nearest_neighbour_(kernel.is_nearest_neighbour()) {
    if (nearest_neighbour_ && (x_ - y_) % 2 != 0) {
        phase_ = Phase::ParityWait;
    } else {
        mirror_sign_ = sign_of(x_ - y_);
    }
    update();
}

void CoupledPair::update() {
    if (x_ == y_) {
        phase_ = Phase::Coupled;
        return;
    }
    if (x_ == 0) {
        phase_ = Phase::Failed;
        return;
    }
    if (phase_ == Phase::ParityWait && (x_ - y_) % 2 == 0) {
        phase_ = Phase::Mirror;
        mirror_sign_ = sign_of(x_ - y_);
    } else if (phase_ == Phase::Mirror && sign_of(x_ - y_) != mirror_sign_) {
        phase_ = Phase::Independent;
    }
}

void CoupledPair::x_jumps(std::int64_t j) {
    if (resolved()) throw DomainError("CoupledPair: pair already resolved");
    x_ += j;
    if (phase_ == Phase::Mirror) y_ -= j;
    update();
}

void CoupledPair::y_jumps(std::int64_t j) {
    if (!y_clock_active()) throw DomainError("CoupledPair: Y has no own clock in this phase");
    y_ += j;
    update();
}

void CoupledPair::shift(std::int64_t dx, std::int64_t dy) {
    x_ += dx;
    y_ += dy;
    update();
}

std::int64_t sample_jump_sum(const JumpKernel& kernel, std::uint64_t L, Rng& rng) {
    const auto jumps = kernel.jumps();
    std::int64_t sum = 0;
    std::uint64_t left = L;
    double mass = 1.0;
    for (std::size_t i = 0; i + 1 < jumps.size() && left > 0; ++i) {
        const double p = jumps[i].probability;
        const std::uint64_t c = mass <= p ? left : rng.binomial(left, p / mass);
        sum += static_cast<std::int64_t>(c) * jumps[i].displacement;
        left -= c;
        mass -= p;
    }
    sum += static_cast<std::int64_t>(left) * jumps.back().displacement;
    return sum;
}

double run_pair_to_resolution(CoupledPair& pair, const JumpKernel& kernel, Rng& rng, const CouplingOptions& options,
                              std::vector<PathPoint>* path, double t0, std::uint64_t* jumps,
                              std::uint64_t* chunks) {
    const std::int64_t m = kernel.max_jump();
    const bool chunking = !options.record_paths && path == nullptr;
    double t = t0;
    std::uint64_t iterations = 0;
    while (!pair.resolved()) {
        if (++iterations > options.max_iterations)
            throw EventCapExceeded("coupling: iteration cap " + std::to_string(options.max_iterations) + " exceeded");
        std::uint64_t L = 0;
        const auto phase = pair.phase();
        if (chunking && phase != CoupledPair::Phase::ParityWait) {
            const std::int64_t dxy = std::abs(pair.x() - pair.y());
            const std::int64_t dx0 = std::abs(pair.x());
            const std::int64_t per = phase == CoupledPair::Phase::Mirror ? 2 * m : m;
            L = static_cast<std::uint64_t>(std::max<std::int64_t>(0, std::min((dxy - 1) / per, (dx0 - 1) / m)));
        }
        if (L >= options.chunk_threshold) {
            if (phase == CoupledPair::Phase::Mirror) {
                t += rng.gamma(static_cast<double>(L));
                const std::int64_t s = sample_jump_sum(kernel, L, rng);
                pair.shift(s, -s);
            } else {
                t += 0.5 * rng.gamma(static_cast<double>(L));
                const std::uint64_t lx = rng.binomial(L, 0.5);
                const std::int64_t sx = sample_jump_sum(kernel, lx, rng);
                const std::int64_t sy = sample_jump_sum(kernel, L - lx, rng);
                pair.shift(sx, sy);
            }
            if (jumps) *jumps += L;
            if (chunks) ++*chunks;
        } else {
            const bool two = pair.y_clock_active();
            t += rng.exponential(two ? 2.0 : 1.0);
            const std::int64_t j = kernel.sample(rng);
            if (two && rng.uniform() < 0.5)
                pair.y_jumps(j);
            else
                pair.x_jumps(j);
            if (jumps) ++*jumps;
        }
        if (path) path->push_back({t, pair.x(), pair.y()});
    }
    return t;
}

double first_hit_origin(std::int64_t x, const JumpKernel& kernel, Rng& rng, std::uint64_t max_iterations) {
    const std::int64_t m = kernel.max_jump();
    double t = 0.0;
    std::uint64_t iterations = 0;
    while (x != 0) {
        if (++iterations > max_iterations) throw EventCapExceeded("first_hit_origin: iteration cap exceeded");
        const auto L = static_cast<std::uint64_t>(std::max<std::int64_t>(0, (std::abs(x) - 1) / m));
        if (L >= 32) {
            t += rng.gamma(static_cast<double>(L));
            x += sample_jump_sum(kernel, L, rng);
        } else {
            t += rng.exponential(1.0);
            x += kernel.sample(rng);
        }
    }
    return t;
}

CouplingOutcome reflection_couple(std::int64_t x0, const JumpKernel& kernel, RngStream stream,
                                  const CouplingOptions& options) {
    if (!kernel.is_symmetric()) throw KernelNotSymmetric("reflection_couple: kernel is not symmetric");
    if (x0 == 0) throw DomainError("reflection_couple: x0 must be nonzero");
    Rng rng = stream.engine();
    CouplingOutcome out;
    CoupledPair pair(x0, 0, kernel);
    std::vector<PathPoint> path;
    if (options.record_paths) path.push_back({0.0, x0, 0});
    const double t = run_pair_to_resolution(pair, kernel, rng, options, options.record_paths ? &path : nullptr, 0.0,
                                            &out.jumps, &out.chunks);
    out.success = pair.phase() == CoupledPair::Phase::Coupled;
    if (out.success) {
        out.coupling_time = t;
        if (pair.x() == 0) {
            out.hit_time_origin = t;
        } else if (options.follow_to_origin) {
            if (options.record_paths) {
                double s = t;
                std::int64_t x = pair.x();
                while (x != 0) {
                    s += rng.exponential(1.0);
                    x += kernel.sample(rng);
                    path.push_back({s, x, x});
                    ++out.jumps;
                }
                out.hit_time_origin = s;
            } else {
                out.hit_time_origin = t + first_hit_origin(pair.x(), kernel, rng, options.max_iterations);
            }
        }
    } else {
        out.hit_time_origin = t;
    }
    if (options.record_paths) out.paths = std::move(path);
    return out;
}

SuccessEstimate coupling_success_prob(std::int64_t x0, const JumpKernel& kernel, std::size_t replicas,
                                      std::uint64_t seed, double horizon) {
    if (!kernel.is_symmetric()) throw KernelNotSymmetric("coupling_success_prob: kernel is not symmetric");
    if (x0 == 0) throw DomainError("coupling_success_prob: x0 must be nonzero");
    if (replicas < 2) throw DomainError("coupling_success_prob: need at least 2 replicas");
    struct Trial {
        double success = 0.0;
        double increment = 0.0;
    };
    const auto trials = run_replicas(replicas, [&](std::size_t r) {
        Rng rng = RngStream{seed, r}.engine();
        CoupledPair pair(x0, 0, kernel);
        CouplingOptions opts;
        run_pair_to_resolution(pair, kernel, rng, opts);
        Trial tr;
        tr.success = pair.phase() == CoupledPair::Phase::Coupled ? 1.0 : 0.0;
        if (pair.x() != 0) first_hit_origin(pair.x(), kernel, rng, opts.max_iterations);
        // X after tau_0, continuing the same random stream
        const std::uint64_t n = rng.poisson(horizon);
        tr.increment = static_cast<double>(sample_jump_sum(kernel, n, rng));
        return tr;
    });
    SuccessEstimate est;
    est.x0 = x0;
    est.replicas = replicas;
    est.increment_horizon = horizon;
    std::vector<double> ind(replicas);
    std::vector<double> inc(replicas);
    std::vector<double> sq(replicas);
    for (std::size_t i = 0; i < replicas; ++i) {
        ind[i] = trials[i].success;
        inc[i] = trials[i].increment;
        sq[i] = inc[i] * inc[i];
        est.successes += trials[i].success > 0.5 ? 1 : 0;
    }
    const auto agg = aggregate_replicas(ind);
    est.estimate = agg.mean;
    est.std_error = agg.std_error;
    const auto c1 = covariance(ind, inc);
    const auto c2 = covariance(ind, sq);
    est.cov_increment = c1.covariance;
    est.cov_increment_se = c1.std_error;
    est.cov_square = c2.covariance;
    est.cov_square_se = c2.std_error;
    auto ok = [](const CovarianceEstimate& c) {
        return c.std_error == 0.0 ? c.covariance == 0.0 : std::abs(c.covariance) <= 4.0 * c.std_error;
    };
    est.independence_ok = ok(c1) && ok(c2);
    return est;
}

double raw_block_start(double epsilon, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double l = std::log(static_cast<double>(std::max<std::size_t>(n, 3)));
    return epsilon * epsilon * nn * nn / (l * l);
}

TimeGrid build_time_grid(double epsilon, std::size_t n_max) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("build_time_grid: epsilon must be in (0,1)");
    if (n_max < 1) throw DomainError("build_time_grid: n_max must be >= 1");
    TimeGrid g;
    g.epsilon = epsilon;
    g.n_max = n_max;
    g.t.resize(3 * n_max + 1);
    g.repaired.resize(n_max);
    g.t[0] = 0.0;
    for (std::size_t n = 0; n < n_max; ++n) {
        const double a = raw_block_start(epsilon, n);
        const double b = raw_block_start(epsilon, n + 1);
        const double raw = epsilon * epsilon * std::pow(static_cast<double>(n + 1), 1.0 - epsilon / 2.0);
        const double len = std::min(raw, (b - a) / 3.0);
        g.repaired[n] = len < raw;
        g.t[3 * n] = a;
        g.t[3 * n + 1] = a + len;
        g.t[3 * n + 2] = a + 2.0 * len;
        g.t[3 * n + 3] = b;
    }
    return g;
}

std::size_t TimeGrid::blocks_completed_by(double s) const {
    std::size_t lo = 0;  // t_{3 lo} <= s
    std::size_t hi = n_max + 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (t[3 * mid] <= s)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

double block_count_ratio(const TimeGrid& grid, double t) {
    return static_cast<double>(grid.blocks_completed_by(t)) * 2.0 * grid.epsilon / (std::sqrt(t) * std::log(t));
}

namespace {

// Walker ids at the origin, in insertion order.
class OriginSet {
public:
    void insert(std::uint32_t id) { ids_.push_back(id); }
    void erase(std::uint32_t id) {
        auto it = std::find(ids_.begin(), ids_.end(), id);
        if (it != ids_.end()) ids_.erase(it);
    }
    const std::vector<std::uint32_t>& ids() const noexcept { return ids_; }

private:
    std::vector<std::uint32_t> ids_;
};

void check_rho_cover(const std::shared_ptr<const RhoSolution>& rho, double T) {
    if (!rho) throw DomainError("coupling: rho_0 solution required");
    if (rho->t_max() < T) throw DomainError("coupling: rho_0 solution does not cover the horizon");
}

}  // namespace

UpperCouplingResult simulate_upper_coupling(double epsilon, double gamma, const JumpKernel& kernel, double T,
                                            RngStream stream, std::shared_ptr<const RhoSolution> rho,
                                            const std::vector<double>& snapshot_times) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("simulate_upper_coupling: epsilon must be in (0,1)");
    if (!(T > 0.0)) throw DomainError("simulate_upper_coupling: T must be > 0");
    check_rho_cover(rho, T);
    const auto schedule = ImmigrationSchedule::tuned(Sign::Plus, epsilon, gamma, Rho0Source::from_solution(rho));
    Rng rng = stream.engine();

    struct Walker {
        std::int64_t pos = 0;
        bool tilde = false;  // otherwise hat
        bool eta = false;
    };
    std::vector<Walker> walkers;
    Occupancy occ_eta;
    Occupancy occ_tilde;
    Occupancy occ_hat;
    OriginSet origin;
    VacancyTracker tilde_vac;
    UpperCouplingResult res;

    std::vector<double> snaps(snapshot_times.begin(), snapshot_times.end());
    for (double s : snaps)
        if (s < 0.0 || s > T) throw DomainError("simulate_upper_coupling: snapshot outside [0, T]");
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
    if (snaps.empty() || snaps.back() != T) snaps.push_back(T);
    std::size_t next_snap = 0;

    auto take_snapshots_until = [&](double upto) {
        while (next_snap < snaps.size() && snaps[next_snap] <= upto) {
            TripleSystemState st;
            st.t = snaps[next_snap];
            for (const auto& w : walkers) {
                const std::size_t partner = w.tilde ? st.eta_tilde.add(w.pos) : st.eta_hat.add(w.pos);
                if (w.eta) {
                    st.eta.add(w.pos);
                    st.pairing.emplace_back(w.tilde, partner);
                }
            }
            st.eta.set_time(st.t);
            st.eta_tilde.set_time(st.t);
            st.eta_hat.set_time(st.t);
            res.snapshots.push_back(std::move(st));
            ++next_snap;
        }
    };
    auto check_site = [&](std::int64_t x) {
        ++res.domination_checks;
        if (occ_eta.count(x) > occ_tilde.count(x) + occ_hat.count(x))
            throw DominationViolated("upper coupling: eta exceeds eta~ + eta^ at x = " + std::to_string(x));
    };
    auto add_walker = [&](bool tilde) {
        const auto id = static_cast<std::uint32_t>(walkers.size());
        walkers.push_back({0, tilde, false});
        (tilde ? occ_tilde : occ_hat).add(0);
        origin.insert(id);
        return id;
    };

    double t = 0.0;
    take_snapshots_until(0.0);
    auto [block_start, block_end] = schedule.envelope_block(0.0);
    double env = schedule.envelope(0.0);
    while (t < T) {
        const double n = static_cast<double>(walkers.size());
        const double total = n + env + gamma;
        const double boundary = std::min(T, block_end);
        const double dt = total > 0.0 ? rng.exponential(total) : kInfinity;
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
        ++res.events;
        const double r = rng.uniform() * total;
        if (r < n) {
            const auto id = static_cast<std::uint32_t>(std::min(static_cast<std::size_t>(r), walkers.size() - 1));
            auto& w = walkers[id];
            const std::int64_t from = w.pos;
            const std::int64_t to = from + kernel.sample(rng);
            if (to == from) continue;
            (w.tilde ? occ_tilde : occ_hat).remove(from);
            (w.tilde ? occ_tilde : occ_hat).add(to);
            if (w.eta) {
                occ_eta.remove(from);
                occ_eta.add(to);
            }
            w.pos = to;
            if (from == 0) {
                origin.erase(id);
                if (w.tilde && occ_tilde.count(0) == 0) tilde_vac.vacate(t);
            }
            if (to == 0) {
                origin.insert(id);
                if (w.tilde && occ_tilde.count(0) == 1) tilde_vac.occupy(t);
            }
            check_site(to);
            continue;
        }
        if (r < n + env) {
            const double rate = schedule.rate(t);
            if (rate > env * (1.0 + 1e-12)) throw EnvelopeViolation("upper coupling: rate exceeds envelope");
            if (rng.uniform() * env < rate) {
                add_walker(true);
                if (occ_tilde.count(0) == 1) tilde_vac.occupy(t);
                check_site(0);
            }
            continue;
        }
        // rate-gamma attempt shared by eta^ and eta
        ++res.attempts;
        if (occ_tilde.count(0) == 0) {
            add_walker(false);
            ++res.hat_additions;
        }
        if (occ_eta.count(0) == 0) {
            // oldest uncoupled union particle at the origin
            std::uint32_t pick = UINT32_MAX;
            for (auto id : origin.ids())
                if (!walkers[id].eta) pick = std::min(pick, id);
            if (pick == UINT32_MAX)
                throw DominationViolated("upper coupling: no uncoupled eta~/eta^ particle at the origin");
            walkers[pick].eta = true;
            occ_eta.add(0);
            ++res.eta_additions;
        }
        check_site(0);
    }
    take_snapshots_until(T);
    tilde_vac.finish(T);
    res.tilde_vacant_time = tilde_vac.vacant_time(0.0, T);
    return res;
}

LowerCouplingResult simulate_lower_coupling(double epsilon, double gamma, const JumpKernel& kernel,
                                            std::size_t n_max, RngStream stream,
                                            std::shared_ptr<const RhoSolution> rho) {
    if (!kernel.is_symmetric()) throw KernelNotSymmetric("simulate_lower_coupling: kernel is not symmetric");
    LowerCouplingResult res;
    res.grid = build_time_grid(epsilon, n_max);
    const auto& grid = res.grid;
    const double T = grid.t.back();
    check_rho_cover(rho, T);
    const auto schedule = ImmigrationSchedule::tuned(Sign::Minus, epsilon, gamma, Rho0Source::from_solution(rho));
    Rng rng = stream.engine();

    enum : std::uint8_t { kEta = 1, kHat = 2, kTilde = 4 };
    struct Walker {
        std::int64_t pos = 0;
        std::uint8_t labels = 0;
        std::int32_t pair = -1;
        bool is_y = false;
        std::uint32_t live_slot = 0;
    };
    struct Pair {
        CoupledPair state;
        std::uint32_t x_id;
        std::uint32_t y_id;
        std::size_t block;
        bool active;
    };
    std::vector<Walker> walkers;
    std::vector<std::uint32_t> live;  // ids of live walkers (clock owners)
    std::vector<Pair> pairs;
    Occupancy occ_eta;
    Occupancy occ_hat;
    Occupancy occ_tilde;
    OriginSet origin;

    res.blocks.resize(n_max);
    for (std::size_t n = 1; n <= n_max; ++n) {
        auto& b = res.blocks[n - 1];
        b.n = n;
        b.expected_m_tilde = schedule.integrated_rate(grid.t[3 * n - 1], grid.t[3 * n]);
    }
    std::vector<std::int64_t> x_of_block(n_max, -1);  // walker id carrying the hat of block n
    std::vector<bool> pair_started(n_max, false);
    std::vector<int> outcome(n_max, 0);  // 0 none, 1 success, -1 failure / no pair

    auto occ_for = [&](std::uint8_t labels, std::int64_t x, bool add) {
        if (labels & kEta) add ? occ_eta.add(x) : occ_eta.remove(x);
        if (labels & kHat) add ? occ_hat.add(x) : occ_hat.remove(x);
        if (labels & kTilde) add ? occ_tilde.add(x) : occ_tilde.remove(x);
    };
    auto new_walker = [&](std::uint8_t labels) {
        const auto id = static_cast<std::uint32_t>(walkers.size());
        Walker w;
        w.labels = labels;
        w.live_slot = static_cast<std::uint32_t>(live.size());
        walkers.push_back(w);
        live.push_back(id);
        occ_for(labels, 0, true);
        origin.insert(id);
        return id;
    };
    auto move_to = [&](std::uint32_t id, std::int64_t to) {
        auto& w = walkers[id];
        if (w.pos == to) return;
        occ_for(w.labels, w.pos, false);
        occ_for(w.labels, to, true);
        if (w.pos == 0) origin.erase(id);
        if (to == 0) origin.insert(id);
        w.pos = to;
    };
    auto kill = [&](std::uint32_t id) {
        auto& w = walkers[id];
        occ_for(w.labels, w.pos, false);
        if (w.pos == 0) origin.erase(id);
        const auto slot = w.live_slot;
        live[slot] = live.back();
        walkers[live[slot]].live_slot = slot;
        live.pop_back();
        w.labels = 0;
    };
    auto drop_hat = [&](std::uint32_t id) {
        auto& w = walkers[id];
        if (w.labels & kHat) {
            occ_hat.remove(w.pos);
            w.labels = static_cast<std::uint8_t>(w.labels & ~kHat);
        }
    };
    auto settle_pair = [&](std::size_t p) {
        auto& pr = pairs[p];
        move_to(pr.x_id, pr.state.x());
        move_to(pr.y_id, pr.state.y());
        if (!pr.state.resolved()) return;
        pr.active = false;
        walkers[pr.x_id].pair = -1;
        walkers[pr.y_id].pair = -1;
        walkers[pr.y_id].is_y = false;
        if (pr.state.phase() == CoupledPair::Phase::Coupled) {
            // merge: X carries the tilde label from now on, Y disappears
            kill(pr.y_id);
            occ_tilde.add(walkers[pr.x_id].pos);
            walkers[pr.x_id].labels |= kTilde;
            outcome[pr.block] = 1;
        } else {
            drop_hat(pr.x_id);
            outcome[pr.block] = -1;
        }
    };

    std::size_t interval = 0;  // current time lies in (t_interval, t_interval+1]
    double t = 0.0;
    auto [block_start, block_end] = schedule.envelope_block(0.0);
    double env = schedule.envelope(0.0);

    auto close_block = [&](std::size_t n) {  // at t_{3n}
        auto& b = res.blocks[n - 1];
        if (x_of_block[n - 1] >= 0 && !pair_started[n - 1]) {
            drop_hat(static_cast<std::uint32_t>(x_of_block[n - 1]));
            outcome[n - 1] = -1;
        }
        b.eta_total = occ_eta.total();
        b.hat_total = occ_hat.total();
    };

    while (interval < 3 * n_max) {
        const double n_live = static_cast<double>(live.size());
        const double total = n_live + env + gamma;
        const double boundary = std::min(grid.t[interval + 1], block_end);
        const double dt = total > 0.0 ? rng.exponential(total) : kInfinity;
        if (t + dt >= boundary) {
            t = boundary;
            if (t >= grid.t[interval + 1]) {
                ++interval;
                if (interval % 3 == 0) close_block(interval / 3);
            }
            if (t >= block_end) {
                std::tie(block_start, block_end) = schedule.envelope_block(t);
                env = schedule.envelope(t);
            }
            continue;
        }
        t += dt;
        ++res.events;
        const std::size_t n = interval / 3 + 1;  // current block
        const std::size_t phase = interval % 3;  // 0: I_n, 1: I'_n, 2: I''_n
        const double r = rng.uniform() * total;
        if (r < n_live) {
            const auto id = live[std::min(static_cast<std::size_t>(r), live.size() - 1)];
            const auto& w = walkers[id];
            if (w.pair >= 0) {
                auto& pr = pairs[static_cast<std::size_t>(w.pair)];
                if (w.is_y) {
                    if (!pr.state.y_clock_active()) continue;  // mirrored: Y moves with X
                    pr.state.y_jumps(kernel.sample(rng));
                } else {
                    pr.state.x_jumps(kernel.sample(rng));
                }
                settle_pair(static_cast<std::size_t>(w.pair));
            } else {
                move_to(id, w.pos + kernel.sample(rng));
            }
            continue;
        }
        if (r < n_live + env) {
            const double rate = schedule.rate(t);
            if (rate > env * (1.0 + 1e-12)) throw EnvelopeViolation("lower coupling: rate exceeds envelope");
            if (rng.uniform() * env >= rate) continue;
            const auto y = new_walker(kTilde);
            if (phase == 2) {
                auto& b = res.blocks[n - 1];
                ++b.m_tilde;
                if (!b.t_tilde_finite) {
                    b.t_tilde_finite = true;
                    const auto x = x_of_block[n - 1];
                    if (x >= 0 && (walkers[static_cast<std::size_t>(x)].labels & kHat)) {
                        const auto xid = static_cast<std::uint32_t>(x);
                        pairs.push_back({CoupledPair(walkers[xid].pos, 0, kernel), xid, y, n - 1, true});
                        pair_started[n - 1] = true;
                        walkers[xid].pair = static_cast<std::int32_t>(pairs.size() - 1);
                        walkers[y].pair = static_cast<std::int32_t>(pairs.size() - 1);
                        walkers[y].is_y = true;
                        settle_pair(pairs.size() - 1);
                    }
                }
            }
            continue;
        }
        // rate-gamma attempt
        const bool tilde_vacant = occ_tilde.count(0) == 0;
        auto& b = res.blocks[n - 1];
        if (tilde_vacant) {
            // hats from earlier blocks at 0 must sit with a tilde particle
            std::uint32_t own = 0;
            const auto cur = x_of_block[n - 1];
            if (cur >= 0) {
                const auto& xw = walkers[static_cast<std::size_t>(cur)];
                own = (xw.pos == 0 && (xw.labels & kHat)) ? 1 : 0;
            }
            ++res.property_d_checks;
            if (occ_hat.count(0) > own) ++res.property_d_violations;
        }
        if (phase == 0 && !b.t_hat_finite && tilde_vacant) {
            b.t_hat_finite = true;
            std::uint32_t xid;
            if (occ_eta.count(0) > 0) {
                std::vector<std::uint32_t> candidates;
                for (auto id : origin.ids())
                    if ((walkers[id].labels & kEta) && !(walkers[id].labels & kHat)) candidates.push_back(id);
                if (candidates.empty()) {
                    ++res.property_d_violations;  // every eta at 0 already carries a hat
                    continue;
                }
                std::sort(candidates.begin(), candidates.end());
                xid = candidates[rng.below(candidates.size())];
                walkers[xid].labels |= kHat;
                occ_hat.add(0);
            } else {
                xid = new_walker(kEta | kHat);
            }
            x_of_block[n - 1] = xid;
        } else if (occ_eta.count(0) == 0) {
            new_walker(kEta);
        }
    }

    // Pairs still running at the horizon: only their outcome matters now.
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (!pairs[p].active) continue;
        run_pair_to_resolution(pairs[p].state, kernel, rng, CouplingOptions{});
        outcome[pairs[p].block] = pairs[p].state.phase() == CoupledPair::Phase::Coupled ? 1 : -1;
        pairs[p].active = false;
    }
    std::uint64_t cum = 0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        auto& b = res.blocks[n - 1];
        b.e_n = outcome[n - 1] == 1;
        cum += b.e_n ? 1 : 0;
        b.cum_e = cum;
        if (b.eta_total < b.hat_total || b.hat_total < b.cum_e) ++res.inequality_violations;
    }
    return res;
}

}  // namespace rwsbi
