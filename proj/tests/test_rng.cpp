#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "rwsbi/rng.hpp"
#include "rwsbi/stats.hpp"

using namespace rwsbi;

TEST_CASE("xoshiro256** reference vector from state 1,2,3,4") {
    Rng r({1, 2, 3, 4});
    CHECK(r() == 11520u);
    CHECK(r() == 0u);
    CHECK(r() == 1509978240u);
    CHECK(r() == 1215971899390074240u);
}

TEST_CASE("golden sequences per (seed, stream)") {
    // independent Python reimplementation of splitmix64 seeding + xoshiro256**
    struct Golden {
        std::uint64_t seed, stream, out[4];
    };
    const Golden table[] = {
        {42, 0, {0xc5860a625adf8456ULL, 0x39395c219e746052ULL, 0xad4dc7562d3061d6ULL, 0x2493e03853e38189ULL}},
        {42, 1, {0x460ae4977938c6ecULL, 0x6eac4d305a650947ULL, 0x7a89362b5fd05f14ULL, 0xadb843de7920777aULL}},
        {0, 0, {0xc78b4f5177ddb86bULL, 0x7262e5670215a9e4ULL, 0x00ece032bf7e105fULL, 0x7464593a1cbb5e67ULL}},
    };
    for (const auto& g : table) {
        Rng r = RngStream{g.seed, g.stream}.engine();
        for (auto v : g.out) CHECK(r() == v);
    }
}

TEST_CASE("substreams are distinct and reproducible") {
    std::set<std::uint64_t> first;
    const RngStream base{7, 3};
    for (std::uint64_t k = 0; k < 1000; ++k) first.insert(base.substream(k).engine()());
    CHECK(first.size() == 1000);
    CHECK(base.substream(5).engine()() == base.substream(5).engine()());
    CHECK(base.substream(5).stream_id != RngStream{7, 4}.substream(5).stream_id);
}

TEST_CASE("uniform ranges and below") {
    Rng r = RngStream{1, 0}.engine();
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        CHECK_UNARY(u >= 0.0 && u < 1.0);
        const double v = r.uniform_open();
        CHECK_UNARY(v > 0.0 && v < 1.0);
        CHECK(r.below(7) < 7u);
    }
    std::vector<std::uint64_t> counts(6, 0);
    for (int i = 0; i < 60000; ++i) ++counts[r.below(6)];
    for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - 10000.0) < 5.0 * std::sqrt(10000.0 * 5 / 6));
}

namespace {

// mean within 5 standard errors, variance within 5%
template <class F>
void check_moments(F draw, double mean, double var, int n = 200000) {
    std::vector<double> x(n);
    for (auto& v : x) v = draw();
    const auto a = aggregate_replicas(x);
    CHECK(std::abs(a.mean - mean) < 5.0 * std::sqrt(var / n));
    CHECK(a.variance == doctest::Approx(var).epsilon(0.05));
}

}  // namespace

TEST_CASE("sampler moments") {
    Rng r = RngStream{11, 0}.engine();
    check_moments([&] { return r.exponential(2.0); }, 0.5, 0.25);
    check_moments([&] { return r.normal(); }, 0.0, 1.0);
    check_moments([&] { return r.gamma(0.4); }, 0.4, 0.4);
    check_moments([&] { return r.gamma(7.5); }, 7.5, 7.5);
    check_moments([&] { return r.beta(2.0, 3.0); }, 0.4, 6.0 / (25.0 * 6.0));
    check_moments([&] { return static_cast<double>(r.binomial(20, 0.3)); }, 6.0, 4.2);
    check_moments([&] { return static_cast<double>(r.binomial(100000, 0.25)); }, 25000.0, 18750.0, 50000);
    check_moments([&] { return static_cast<double>(r.poisson(3.5)); }, 3.5, 3.5);
    check_moments([&] { return static_cast<double>(r.poisson(250.0)); }, 250.0, 250.0);
}

TEST_CASE("binomial and poisson edge cases") {
    Rng r = RngStream{2, 0}.engine();
    CHECK(r.binomial(0, 0.5) == 0u);
    CHECK(r.binomial(10, 0.0) == 0u);
    CHECK(r.binomial(10, 1.0) == 10u);
    CHECK(r.poisson(0.0) == 0u);
}

TEST_CASE("poisson sampler passes chi-square") {
    Rng r = RngStream{5, 0}.engine();
    for (double mean : {0.7, 12.0, 80.0}) {
        std::vector<std::uint64_t> s(20000);
        for (auto& v : s) v = r.poisson(mean);
        CHECK(chi_square_poisson(s, mean).p_value > 0.001);
    }
}
