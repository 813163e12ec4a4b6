#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "rwsbi/errors.hpp"
#include "rwsbi/heat.hpp"
#include "rwsbi/particles.hpp"
#include "rwsbi/stats.hpp"

using namespace rwsbi;

namespace {

std::shared_ptr<const RhoSolution> small_solution(double t_max) {
    static std::shared_ptr<const RhoSolution> cached;
    if (!cached || cached->t_max() < t_max)
        cached = std::make_shared<const RhoSolution>(solve_rho(HeatParams(1.0, 1.0, ssrw()), t_max, std::nullopt, 1e-8));
    return cached;
}

}  // namespace

TEST_CASE("occupancy counts and growth") {
    Occupancy occ;
    CHECK(occ.count(5) == 0);
    CHECK(occ.add(0) == 1);
    CHECK(occ.add(0) == 2);
    CHECK(occ.add(-1000) == 1);
    CHECK(occ.add(1000) == 1);
    CHECK(occ.total() == 4);
    CHECK(occ.count(0) == 2);
    CHECK(occ.remove(0) == 1);
    CHECK_THROWS_AS(occ.remove(7), RangeError);
    CHECK_THROWS_AS(occ.remove(5000), RangeError);
    const auto sp = occ.sparse();
    REQUIRE(sp.size() == 3);
    CHECK(sp[0].first == -1000);
    CHECK(sp[2].first == 1000);
}

TEST_CASE("particle system keeps occupancy consistent") {
    ParticleSystem sys;
    Rng rng = RngStream{3, 0}.engine();
    for (int i = 0; i < 50; ++i) sys.add(static_cast<std::int64_t>(rng.below(11)) - 5);
    for (int i = 0; i < 2000; ++i) {
        const auto p = static_cast<std::size_t>(rng.below(sys.count_total()));
        sys.move(p, sys.positions()[p] + (rng.bernoulli(0.5) ? 1 : -1));
    }
    sys.remove(0);
    sys.remove(sys.count_total() - 1);
    CHECK(sys.count_total() == 48);
    CHECK(sys.consistent());
}

TEST_CASE("vacancy tracker") {
    VacancyTracker v;
    CHECK(v.vacant_now());
    v.occupy(1.0);
    v.vacate(3.0);
    v.occupy(4.5);
    v.vacate(6.0);
    v.finish(10.0);
    CHECK(v.vacant_time(0.0, 10.0) == doctest::Approx(1.0 + 1.5 + 4.0));
    CHECK(v.vacant_time(2.0, 5.0) == doctest::Approx(1.5));
    CHECK(v.vacant_time(3.5, 3.5) == 0.0);
    CHECK(vacant_time(v, 0.5, 7.0) == doctest::Approx(0.5 + 1.5 + 1.0));
    CHECK_THROWS_AS(v.occupy(11.0), RangeError);
    CHECK_THROWS_AS(v.vacant_time(5.0, 11.0), RangeError);
}

TEST_CASE("rwsbi runs are deterministic and replay without blocking violations") {
    SimulationOptions opt;
    opt.record_log = true;
    opt.snapshot_times = {10.0, 50.0};
    const auto a = simulate_rwsbi(1.0, ssrw(), 100.0, RngStream{7, 2}, opt);
    const auto b = simulate_rwsbi(1.0, ssrw(), 100.0, RngStream{7, 2}, opt);
    CHECK(a.successes == b.successes);
    CHECK(a.jumps == b.jumps);
    CHECK(std::vector<std::int64_t>(a.final_state().positions().begin(), a.final_state().positions().end()) ==
          std::vector<std::int64_t>(b.final_state().positions().begin(), b.final_state().positions().end()));
    CHECK(a.snapshots.size() == 3);
    CHECK(a.snapshot_at(10.0).count_total() <= a.snapshot_at(50.0).count_total());
    CHECK(a.successes + a.blocked == a.attempts);
    CHECK(a.final_state().count_total() == a.successes);

    REQUIRE(a.log.has_value());
    const auto rep = replay_log(*a.log, 100.0);
    CHECK(rep.blocking_violations == 0);
    CHECK(rep.consistent);
    CHECK(rep.final_count == a.successes);
    CHECK(rep.vacancy.vacant_time(0.0, 100.0) == doctest::Approx(a.vacancy.vacant_time(0.0, 100.0)));
    for (const auto& s : a.snapshots) CHECK(s.consistent());
}

TEST_CASE("rwsbi with gamma zero stays empty") {
    const auto r = simulate_rwsbi(0.0, ssrw(), 50.0, RngStream{1, 0});
    CHECK(r.final_state().count_total() == 0);
    CHECK(r.vacancy.vacant_time(0.0, 50.0) == doctest::Approx(50.0));
    CHECK_THROWS_AS(simulate_rwsbi(1.0, ssrw(), -1.0, RngStream{1, 0}), DomainError);
}

TEST_CASE("replay detects a success on an occupied origin") {
    EventLog log;
    log.events.push_back({1.0, EventKind::ImmigrationSuccess, 0, 0, 0});
    log.events.push_back({2.0, EventKind::ImmigrationSuccess, 1, 0, 0});
    log.origin_changes.push_back({1.0, 1});
    log.origin_changes.push_back({2.0, 2});
    const auto rep = replay_log(log, 3.0);
    CHECK(rep.blocking_violations == 1);
}

TEST_CASE("tuned schedule: envelope dominates, rate nonincreasing") {
    const auto rho = small_solution(64.0);
    const auto plus = ImmigrationSchedule::tuned(Sign::Plus, 0.3, 1.0, Rho0Source::from_solution(rho));
    const auto minus = ImmigrationSchedule::tuned(Sign::Minus, 0.3, 1.0, Rho0Source::from_solution(rho));
    double prev = plus.rate(0.0);
    CHECK(prev == doctest::Approx(1.3));
    for (double t = 0.01; t <= 64.0; t += 0.37) {
        CHECK(plus.envelope(t) >= plus.rate(t));
        CHECK(plus.rate(t) <= prev + 1e-12);
        prev = plus.rate(t);
        CHECK(minus.rate(t) / plus.rate(t) == doctest::Approx(0.7 / 1.3));
        const auto [lo, hi] = plus.envelope_block(t);
        CHECK(lo <= t);
        CHECK(t < hi);
    }
    const auto z1 = ImmigrationSchedule::tuned(Sign::Plus, 0.0, 1.0, Rho0Source::from_solution(rho));
    const auto z2 = ImmigrationSchedule::tuned(Sign::Minus, 0.0, 1.0, Rho0Source::from_solution(rho));
    CHECK(z1.rate(12.5) == z2.rate(12.5));
    CHECK_THROWS_AS(ImmigrationSchedule::tuned(Sign::Plus, 1.0, 1.0, Rho0Source::from_solution(rho)), DomainError);
    CHECK_THROWS_AS(ImmigrationSchedule::constant(-1.0), DomainError);
}

TEST_CASE("asymptotic rho0 source is clamped and nonincreasing in rate") {
    const auto src = Rho0Source::asymptotic(HeatParams(1.0, 1.0, ssrw()));
    const auto s = ImmigrationSchedule::tuned(Sign::Plus, 0.2, 1.0, src);
    double prev = s.rate(0.0);
    for (double t = 0.0; t < 1e4; t = t * 1.3 + 0.1) {
        CHECK(src(t) >= 0.0);
        CHECK(s.rate(t) <= prev + 1e-12);
        prev = s.rate(t);
    }
}

TEST_CASE("poisson system arrival counts match the integrated rate") {
    const double T = 32.0;
    const auto rho = small_solution(T);
    const auto sched = ImmigrationSchedule::tuned(Sign::Plus, 0.5, 1.0, Rho0Source::from_solution(rho));
    const double mean = sched.integrated_rate(0.0, T);
    const auto counts = run_replicas(400, [&](std::size_t r) {
        return static_cast<double>(simulate_poisson_system(sched, ssrw(), T, RngStream{11, r}).successes);
    });
    const auto agg = aggregate_replicas(counts);
    CHECK(std::abs(agg.mean - mean) < 4.0 * std::sqrt(mean / 400.0));
    CHECK(agg.variance / mean == doctest::Approx(1.0).epsilon(0.25));

    const auto one = simulate_poisson_system(sched, ssrw(), T, RngStream{11, 0});
    CHECK(one.rate_nonincreasing);
    CHECK_THROWS_AS(simulate_poisson_system(ImmigrationSchedule::constant(1.0), ssrw(), T, RngStream{1, 0}),
                    DomainError);
    CHECK_THROWS_AS(simulate_poisson_system(sched, ssrw(), 2 * rho->t_max(), RngStream{1, 0}), DomainError);
}

TEST_CASE("profile estimator") {
    ParticleSystem sys;
    for (int i = 0; i < 10; ++i) sys.add(0);
    sys.add(100);
    const double t = 100.0, sigma = 1.0;
    const double norm = sigma * std::sqrt(t) * std::log(t);
    CHECK(profile_estimator(sys, [](double) { return 1.0; }, t, sigma) == doctest::Approx(11.0 / norm));
    CHECK(profile_estimator(sys, [](double y) { return y; }, t, sigma) == doctest::Approx(10.0 / norm));
}
