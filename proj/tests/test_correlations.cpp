#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <sstream>
#include <vector>

#include "rwsbi/correlations.hpp"
#include "rwsbi/errors.hpp"
#include "rwsbi/rng.hpp"

using namespace rwsbi;

namespace {

// E[prod (1{E_i vacant} - p_i)] summed directly over which events are kept
// as indicators; works from the atom masses only.
double atom_oracle(int k, const std::vector<double>& atoms) {
    const std::uint32_t full = (1u << k) - 1;
    std::vector<double> p(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        double m = 0.0;
        for (std::uint32_t s = 1; s <= full; ++s)
            if (s & (1u << i)) m += atoms[s];
        p[static_cast<std::size_t>(i)] = std::exp(-m);
    }
    double total = 0.0;
    for (std::uint32_t J = 0; J <= full; ++J) {
        double hit = 0.0;
        for (std::uint32_t s = 1; s <= full; ++s)
            if (s & J) hit += atoms[s];
        double term = std::exp(-hit);
        for (int i = 0; i < k; ++i)
            if (!(J & (1u << i))) term *= -p[static_cast<std::size_t>(i)];
        total += term;
    }
    return total;
}

std::vector<double> random_atoms(int k, Rng& rng) {
    std::vector<double> a(std::size_t{1} << k, 0.0);
    for (std::size_t s = 1; s < a.size(); ++s)
        if (!rng.bernoulli(0.2)) a[s] = rng.uniform() * 0.3 / std::exp2(std::popcount(s) - 1);
    return a;
}

bool close(double a, double b, double rel, double abs) { return std::abs(a - b) <= abs + rel * std::abs(b); }

}  // namespace

TEST_CASE("two events: closed form") {
    for (double n12 : {0.0, 0.1, 0.5}) {
        const VacancySpec s(2, {0.0, 1.0, 1.0, n12});
        const double want = std::exp(-2.0) * (std::exp(n12) - 1.0);
        CHECK(correlation_exact(s) == doctest::Approx(want).epsilon(1e-13));
    }
    CHECK(correlation_exact(VacancySpec(2, {0.0, 1.0, 1.0, 0.5})) == doctest::Approx(0.0877949).epsilon(1e-6));
}

TEST_CASE("degenerate cases vanish") {
    CHECK(correlation_exact(VacancySpec(1, {0.0, 0.7})) == doctest::Approx(0.0).epsilon(1e-15));
    std::vector<double> atoms(8, 0.0);
    atoms[1] = 0.4;
    atoms[2] = 0.9;
    atoms[4] = 0.2;
    const auto s = VacancySpec::from_atoms(3, atoms);
    CHECK(std::abs(correlation_exact(s)) < 1e-15);
    CHECK(std::abs(correlation_series(s, 6).value) < 1e-15);
}

TEST_CASE("exact agrees with the atom oracle") {
    Rng rng = RngStream{17, 0}.engine();
    for (int k = 2; k <= 8; ++k) {
        for (int rep = 0; rep < 10; ++rep) {
            const auto atoms = random_atoms(k, rng);
            const auto s = VacancySpec::from_atoms(k, atoms);
            CHECK(close(correlation_exact(s), atom_oracle(k, atoms), 1e-10, 1e-14));
        }
    }
}

TEST_CASE("series: remainder bound holds and high order matches exact") {
    Rng rng = RngStream{18, 0}.engine();
    for (int k = 2; k <= 6; ++k) {
        for (int rep = 0; rep < 10; ++rep) {
            const auto s = VacancySpec::from_atoms(k, random_atoms(k, rng));
            const double exact = correlation_exact(s);
            const double damp = std::exp(-s.singleton_sum());
            for (int M = 0; M <= 3 + k; ++M) {
                const auto r = correlation_series(s, M);
                CHECK(std::abs(r.value - exact) <= damp * r.remainder_bound * (1 + 1e-12) + 1e-15);
            }
            const int M = series_order_for(s, 1e-14);
            CHECK(M >= k);
            CHECK(close(correlation_series(s, M).value, exact, 1e-9, 1e-13));
        }
    }
    CHECK(correlation_series(VacancySpec(2, {0.0, 1.0, 1.0, 0.5}), 0).value == 0.0);
    CHECK_THROWS_AS(correlation_series(VacancySpec(2, {0.0, 1.0, 1.0, 0.5}), -1), DomainError);
}

TEST_CASE("permutation invariance and intersection scaling") {
    Rng rng = RngStream{19, 0}.engine();
    const auto s = VacancySpec::from_atoms(4, random_atoms(4, rng));
    const double c = correlation_exact(s);
    CHECK(correlation_exact(s.permuted({2, 0, 3, 1})) == doctest::Approx(c).epsilon(1e-12));
    CHECK(correlation_exact(s.permuted({3, 2, 1, 0})) == doctest::Approx(c).epsilon(1e-12));
    // first order in the intersections
    const double h = 1e-5;
    const double slope = correlation_exact(s.scaled_intersections(h)) / h;
    const double slope2 = correlation_exact(s.scaled_intersections(2 * h)) / (2 * h);
    CHECK(slope == doctest::Approx(slope2).epsilon(1e-3));
    CHECK(std::abs(correlation_exact(s.scaled_intersections(0.0))) < 1e-15);
}

TEST_CASE("validation") {
    CHECK_THROWS_AS(VacancySpec(2, {0.0, 1.0, 1.0}), InvalidSpec);
    CHECK_THROWS_AS(VacancySpec(2, {0.0, -1.0, 1.0, 0.0}), InvalidSpec);
    CHECK_THROWS_AS(VacancySpec(2, {0.0, 1.0, 1.0, 2.0}), UnrealizableSpec);
    // singles 1, pairs 0.6, triple 0: the centre atom would be negative
    CHECK_THROWS_AS(VacancySpec(3, {0.0, 1.0, 1.0, 0.6, 1.0, 0.6, 0.6, 0.0}), UnrealizableSpec);
    CHECK_THROWS_AS(correlation_exact(VacancySpec(21, std::vector<double>(std::size_t{1} << 21, 0.0))), KTooLarge);
    CHECK_THROWS_AS(correlation_series(VacancySpec(9, std::vector<double>(std::size_t{1} << 9, 0.0)), 9), KTooLarge);
}

TEST_CASE("parser") {
    std::istringstream in("# two events\nI:1 = 1.0\nI:2 = 1\nI:1,2 = 0.5  # overlap\n");
    const auto s = parse_vacancy_spec(in);
    CHECK(s.k() == 2);
    CHECK(s.nu(3) == 0.5);
    std::istringstream missing("I:1 = 1\nI:1,3 = 0.1\n");
    CHECK_THROWS_AS(parse_vacancy_spec(missing), InvalidSpec);
    std::istringstream dup("I:1 = 1\nI:1 = 2\n");
    CHECK_THROWS(parse_vacancy_spec(dup));
    std::istringstream junk("I:1 = abc\n");
    CHECK_THROWS(parse_vacancy_spec(junk));
}

TEST_CASE("monte carlo agrees and is reproducible") {
    Rng rng = RngStream{20, 0}.engine();
    const auto s = VacancySpec::from_atoms(3, random_atoms(3, rng));
    const auto a = correlation_montecarlo(s, 200000, 5);
    const auto b = correlation_montecarlo(s, 200000, 5);
    CHECK(a.estimate == b.estimate);
    CHECK(a.replicas == 200000);
    CHECK(std::abs(a.estimate - correlation_exact(s)) < 4.0 * a.std_error);
}
