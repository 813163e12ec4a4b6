#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rwsbi/errors.hpp"
#include "rwsbi/rng.hpp"
#include "rwsbi/stats.hpp"

using namespace rwsbi;

TEST_CASE("aggregate of a single value flags variance undefined") {
    const std::vector<double> x{3.5};
    const auto a = aggregate_replicas(x);
    CHECK(a.n == 1);
    CHECK(a.mean == 3.5);
    CHECK_FALSE(a.variance_defined);
}

TEST_CASE("aggregate of 1,2,3") {
    const std::vector<double> x{1, 2, 3};
    const auto a = aggregate_replicas(x);
    CHECK(a.mean == 2.0);
    CHECK(a.variance == 1.0);
    CHECK(a.std_error == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(a.min == 1.0);
    CHECK(a.max == 3.0);
}

TEST_CASE("aggregate is permutation invariant bit for bit") {
    Rng r = RngStream{3, 0}.engine();
    std::vector<double> x(1001);
    for (auto& v : x) v = r.normal() * 1e6 + r.uniform();
    const auto a = aggregate_replicas(x);
    std::vector<double> y(x.rbegin(), x.rend());
    std::swap(y[0], y[500]);
    const auto b = aggregate_replicas(y);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
}

TEST_CASE("empty input") {
    CHECK_THROWS_AS(aggregate_replicas(std::vector<double>{}), EmptyInput);
}

TEST_CASE("chi-square rejects a wrong mean") {
    Rng r = RngStream{4, 0}.engine();
    std::vector<std::uint64_t> s(5000);
    for (auto& v : s) v = r.poisson(10.0);
    CHECK(chi_square_poisson(s, 10.0).p_value > 0.001);
    CHECK(chi_square_poisson(s, 11.0).p_value < 1e-6);
}

TEST_CASE("ks two-sample") {
    Rng r = RngStream{6, 0}.engine();
    std::vector<double> a(2000), b(2000), c(2000);
    for (auto& v : a) v = r.normal();
    for (auto& v : b) v = r.normal();
    for (auto& v : c) v = r.normal() + 0.3;
    CHECK(ks_two_sample(a, b, 0.01).passes());
    CHECK_FALSE(ks_two_sample(a, c, 0.01).passes());
    // c(0.01) = sqrt(-ln(0.005)/2)
    CHECK(ks_two_sample(a, b, 0.01).critical == doctest::Approx(1.62762 * std::sqrt(2.0 / 2000.0)).epsilon(1e-4));
}

TEST_CASE("covariance of independent and dependent samples") {
    Rng r = RngStream{8, 0}.engine();
    std::vector<double> a(20000), b(20000), c(20000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = r.normal();
        b[i] = r.normal();
        c[i] = a[i] + 0.5 * r.normal();
    }
    const auto ind = covariance(a, b);
    CHECK(std::abs(ind.covariance) < 4.0 * ind.std_error);
    CHECK(covariance(a, c).covariance == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("run_replicas is index deterministic") {
    auto f = [](std::size_t i) { return RngStream{9, i}.engine().uniform(); };
    const auto x = run_replicas(100, f);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == f(i));
}
