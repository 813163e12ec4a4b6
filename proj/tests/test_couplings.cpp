#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "rwsbi/couplings.hpp"
#include "rwsbi/errors.hpp"
#include "rwsbi/stats.hpp"

using namespace rwsbi;

namespace {

JumpKernel wide() {
    const std::vector<Jump> j{{-2, 0.25}, {-1, 0.25}, {1, 0.25}, {2, 0.25}};
    return validate_kernel(j);
}

std::shared_ptr<const RhoSolution> solution(double t_max) {
    static std::shared_ptr<const RhoSolution> cached;
    if (!cached || cached->t_max() < t_max)
        cached = std::make_shared<const RhoSolution>(solve_rho(HeatParams(1.0, 1.0, ssrw()), t_max, std::nullopt, 1e-8));
    return cached;
}

// Independent count of blocks: t_{3n} is never touched by the repair.
double block_ratio_oracle(double eps, std::size_t n_max, double t) {
    std::size_t c = 0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        const double l = std::log(std::max<double>(static_cast<double>(n), 3.0));
        if (eps * eps * n * n / (l * l) <= t) ++c;
    }
    return static_cast<double>(c) * 2.0 * eps / (std::sqrt(t) * std::log(t));
}

}  // namespace

TEST_CASE("coupled pair phases") {
    const auto k = ssrw();
    CoupledPair odd(3, 0, k);
    CHECK(odd.phase() == CoupledPair::Phase::ParityWait);
    CHECK(odd.y_clock_active());
    odd.y_jumps(1);
    CHECK(odd.phase() == CoupledPair::Phase::Mirror);
    CHECK_FALSE(odd.y_clock_active());
    CHECK_THROWS_AS(odd.y_jumps(1), DomainError);
    odd.x_jumps(-1);
    CHECK(odd.x() == 2);
    CHECK(odd.y() == 2);
    CHECK(odd.phase() == CoupledPair::Phase::Coupled);
    CHECK_THROWS_AS(odd.x_jumps(1), DomainError);

    CoupledPair fail(1, 5, wide());
    CHECK(fail.phase() == CoupledPair::Phase::Mirror);
    fail.x_jumps(-1);
    CHECK(fail.phase() == CoupledPair::Phase::Failed);

    CoupledPair cross(4, 0, wide());
    CHECK(cross.phase() == CoupledPair::Phase::Mirror);
    cross.x_jumps(-1);  // 3 vs 1
    cross.x_jumps(-2);  // 1 vs 3: crossed
    CHECK(cross.phase() == CoupledPair::Phase::Independent);

    CoupledPair at_origin(0, 0, k);
    CHECK(at_origin.phase() == CoupledPair::Phase::Coupled);
}

TEST_CASE("ssrw reflection coupling always succeeds") {
    for (std::int64_t x0 : {10, 7, -3, 1}) {
        for (std::uint64_t r = 0; r < 200; ++r) {
            const auto o = reflection_couple(x0, ssrw(), RngStream{5, r});
            CHECK(o.success);
            CHECK(std::isfinite(o.coupling_time));
        }
    }
    const auto est = coupling_success_prob(12, ssrw(), 500, 9);
    CHECK(est.successes == 500);
    CHECK(est.estimate == 1.0);
}

TEST_CASE("reflection coupling errors") {
    const std::vector<Jump> skew{{-2, 1.0 / 3.0}, {1, 2.0 / 3.0}};
    const auto k = validate_kernel(skew);
    CHECK_THROWS_AS(reflection_couple(3, k, RngStream{1, 0}), KernelNotSymmetric);
    CHECK_THROWS_AS(reflection_couple(0, ssrw(), RngStream{1, 0}), DomainError);
    CHECK_THROWS_AS(coupling_success_prob(4, ssrw(), 1, 1), DomainError);
    CouplingOptions tight;
    tight.max_iterations = 3;
    tight.chunk_threshold = std::numeric_limits<std::uint64_t>::max();
    CHECK_THROWS_AS(reflection_couple(1000, wide(), RngStream{1, 0}, tight), EventCapExceeded);
}

TEST_CASE("recorded paths agree after coupling and respect the mirror") {
    CouplingOptions opt;
    opt.record_paths = true;
    opt.follow_to_origin = true;
    for (std::uint64_t r = 0; r < 100; ++r) {
        const auto o = reflection_couple(9, wide(), RngStream{21, r}, opt);
        REQUIRE(o.paths.has_value());
        const auto& p = *o.paths;
        CHECK(p.front().x == 9);
        CHECK(p.front().y == 0);
        for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i].t >= p[i - 1].t);
        if (o.success) {
            CHECK(o.coupling_time <= o.hit_time_origin);
            for (const auto& q : p)
                if (q.t >= o.coupling_time) CHECK(q.x == q.y);
            CHECK(p.back().x == 0);
        } else {
            CHECK(o.coupling_time == kInfinity);
            CHECK(std::isfinite(o.hit_time_origin));
            CHECK(p.back().x == 0);
            CHECK(p.back().y != 0);
        }
    }
}

TEST_CASE("chunked and single-step pair runs have the same law") {
    // total work grows like n^2 (heavy-tailed meeting times)
    const std::size_t n = 1000;
    CouplingOptions chunked;
    chunked.chunk_threshold = 4;
    CouplingOptions single;
    single.chunk_threshold = std::numeric_limits<std::uint64_t>::max();
    auto run = [&](const CouplingOptions& opt, std::uint64_t seed) {
        std::vector<double> times(n);
        double succ = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const auto o = reflection_couple(40, wide(), RngStream{seed, r}, opt);
            succ += o.success ? 1.0 : 0.0;
            times[r] = o.coupling_time;
        }
        return std::pair{succ / n, times};
    };
    const auto [pa, ta] = run(chunked, 31);
    const auto [pb, tb] = run(single, 32);
    const double se = std::sqrt((pa * (1 - pa) + pb * (1 - pb)) / n);
    CHECK(std::abs(pa - pb) < 4.0 * se + 1e-12);
    const auto ks = ks_two_sample(ta, tb, 0.001);
    CHECK(ks.statistic < ks.critical);
    CHECK(reflection_couple(40, wide(), RngStream{31, 0}, chunked).chunks > 0);
    CHECK(reflection_couple(40, wide(), RngStream{31, 0}, single).chunks == 0);
}

TEST_CASE("jump sums and hitting times") {
    Rng rng = RngStream{4, 0}.engine();
    const std::uint64_t L = 50;
    std::vector<double> s(20000);
    for (auto& v : s) v = static_cast<double>(sample_jump_sum(wide(), L, rng));
    const auto a = aggregate_replicas(s);
    CHECK(std::abs(a.mean) < 4.0 * std::sqrt(2.5 * L / s.size()));
    CHECK(a.variance / (2.5 * L) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(sample_jump_sum(wide(), 0, rng) == 0);

    for (int i = 0; i < 50; ++i) CHECK(first_hit_origin(200, ssrw(), rng, 1'000'000'000) > 0.0);
}

TEST_CASE("coupling success grows with distance for a wide kernel") {
    const auto near = coupling_success_prob(2, wide(), 4000, 3);
    const auto far = coupling_success_prob(32, wide(), 4000, 3);
    CHECK(far.estimate > near.estimate);
    CHECK(near.estimate < 1.0);
    CHECK(far.independence_ok);
}

TEST_CASE("time grid") {
    CHECK_THROWS_AS(build_time_grid(0.0, 10), DomainError);
    CHECK_THROWS_AS(build_time_grid(1.0, 10), DomainError);
    const auto g = build_time_grid(0.5, 10000);
    REQUIRE(g.t.size() == 3 * 10000 + 1);
    for (std::size_t i = 1; i < g.t.size(); ++i) CHECK(g.t[i] > g.t[i - 1]);
    for (std::size_t n = 1; n <= 10000; n += 997) CHECK(g.block_end(n) == doctest::Approx(raw_block_start(0.5, n)));
    const double tmax = g.block_end(10000);
    CHECK(g.blocks_completed_by(tmax) == 10000);
    CHECK(g.blocks_completed_by(std::nextafter(tmax, 0.0)) == 9999);
    for (double t : {1e3, 1e5, tmax})
        CHECK(block_count_ratio(g, t) == doctest::Approx(block_ratio_oracle(0.5, 10000, t)).epsilon(1e-12));
    CHECK(block_count_ratio(g, tmax) == doctest::Approx(1.46).epsilon(0.02));
    CHECK(block_count_ratio(g, 1e5) > block_count_ratio(g, tmax));
}

TEST_CASE("upper coupling keeps eta below eta~ + eta^") {
    const double T = 200.0;
    const auto rho = solution(T);
    const auto r = simulate_upper_coupling(0.5, 1.0, ssrw(), T, RngStream{8, 0}, rho, {50.0, 100.0});
    REQUIRE(r.snapshots.size() == 3);
    CHECK(r.domination_checks > 0);
    CHECK(r.tilde_vacant_time >= 0.0);
    CHECK(r.tilde_vacant_time <= T);
    for (const auto& s : r.snapshots) {
        CHECK(s.pairing.size() == s.eta.count_total());
        for (const auto& [x, c] : s.eta.occupancy_map().sparse())
            CHECK(c <= s.eta_tilde.occupancy(x) + s.eta_hat.occupancy(x));
    }
    const auto& last = r.snapshots.back();
    CHECK(last.eta.count_total() == r.eta_additions);
    CHECK(last.eta_hat.count_total() == r.hat_additions);
    CHECK_THROWS_AS(simulate_upper_coupling(0.5, 1.0, ssrw(), 10 * T, RngStream{8, 0}, rho), DomainError);
}

TEST_CASE("lower coupling invariants") {
    const std::size_t n_max = 200;
    const auto g = build_time_grid(0.5, n_max);
    const auto rho = solution(g.block_end(n_max) + 1.0);
    double m = 0.0, expected = 0.0;
    for (std::uint64_t rep = 0; rep < 4; ++rep) {
        const auto r = simulate_lower_coupling(0.5, 1.0, ssrw(), n_max, RngStream{13, rep}, rho);
        REQUIRE(r.blocks.size() == n_max);
        CHECK(r.inequality_violations == 0);
        CHECK(r.property_d_violations == 0);
        std::uint64_t cum = 0;
        for (const auto& b : r.blocks) {
            cum += b.e_n ? 1 : 0;
            CHECK(b.cum_e == cum);
            if (b.e_n) CHECK((b.t_hat_finite && b.t_tilde_finite));
            CHECK(b.hat_total <= b.eta_total);
            CHECK(cum <= b.hat_total);
            m += static_cast<double>(b.m_tilde);
            expected += b.expected_m_tilde;
        }
    }
    CHECK(std::abs(m - expected) < 4.0 * std::sqrt(expected));
    CHECK_THROWS_AS(simulate_lower_coupling(0.5, 1.0, validate_kernel(std::vector<Jump>{{-2, 1.0 / 3.0}, {1, 2.0 / 3.0}}),
                                            10, RngStream{1, 0}, rho),
                    KernelNotSymmetric);
}
