#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "rwsbi/errors.hpp"
#include "rwsbi/kernel.hpp"
#include "rwsbi/rng.hpp"

using namespace rwsbi;

namespace {

// SSRW at rate 1: p_x(t) = e^{-t} I_x(t)
double bessel_oracle(std::int64_t x, double t) {
    return std::exp(-t) * boost::math::cyl_bessel_i(static_cast<double>(x), t);
}

JumpKernel wide() {
    const Jump j[] = {{-2, 0.25}, {-1, 0.25}, {1, 0.25}, {2, 0.25}};
    return validate_kernel(j);
}

}  // namespace

TEST_CASE("ssrw basics") {
    const auto k = ssrw();
    CHECK(k.sigma2() == 1.0);
    CHECK(k.is_symmetric());
    CHECK(k.is_nearest_neighbour());
    CHECK(k.probability(1) == 0.5);
    CHECK(k.probability(0) == 0.0);
    CHECK(k.characteristic(std::numbers::pi / 2) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("validation errors") {
    const Jump short_sum[] = {{-1, 0.45}, {1, 0.45}};
    CHECK_THROWS_AS(validate_kernel(short_sum), NotAProbability);
    const Jump negative[] = {{-1, -0.5}, {1, 1.5}};
    CHECK_THROWS_AS(validate_kernel(negative), NotAProbability);
    const Jump drift[] = {{-1, 0.4}, {1, 0.6}};
    CHECK_THROWS_AS(validate_kernel(drift), NonZeroMean);
    const Jump lazy[] = {{0, 1.0}};
    CHECK_THROWS_AS(validate_kernel(lazy), NonFiniteVariance);
    CHECK_THROWS_AS(parse_kernel("1 0.5\n-1 zero\n"), KernelParseError);
}

TEST_CASE("merging and asymmetric zero-mean kernels") {
    const Jump dup[] = {{1, 0.25}, {1, 0.25}, {-1, 0.5}};
    const auto k = validate_kernel(dup);
    CHECK(k.jumps().size() == 2);
    CHECK(k.probability(1) == 0.5);
    const Jump skew[] = {{-2, 1.0 / 3.0}, {1, 2.0 / 3.0}};
    const auto s = validate_kernel(skew);
    CHECK_FALSE(s.is_symmetric());
    CHECK(s.sigma2() == doctest::Approx(2.0));
}

TEST_CASE("parse and load kernel file") {
    const auto k = parse_kernel("# wide kernel\n-2 0.25\n-1 0.25\n1 0.25  # right\n2 0.25\n");
    CHECK(k.sigma2() == doctest::Approx(2.5));
    CHECK(k.max_jump() == 2);
    const auto path = std::filesystem::temp_directory_path() / "rwsbi_kernel_test.txt";
    {
        std::ofstream f(path);
        f << "-1 0.5\n1 0.5\n";
    }
    CHECK(load_kernel(path.string()).sigma2() == 1.0);
    CHECK(load_kernel("ssrw").sigma2() == 1.0);
    std::filesystem::remove(path);
    CHECK_THROWS(load_kernel("/nonexistent/kernel.txt"));
}

TEST_CASE("sampling matches the kernel") {
    const auto k = wide();
    Rng r = RngStream{1, 0}.engine();
    std::vector<int> counts(5, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(k.sample(r) + 2)];
    CHECK(counts[2] == 0);
    for (int x : {0, 1, 3, 4}) CHECK(std::abs(counts[static_cast<std::size_t>(x)] - n / 4) < 5 * std::sqrt(n * 0.1875));
}

TEST_CASE("uniformization transition probabilities match Bessel functions") {
    const auto k = ssrw();
    for (double t : {0.5, 3.0, 20.0, 100.0}) {
        const auto tab = transition_probability(k, t, 1e-13);
        CHECK(tab.total() == doctest::Approx(1.0).epsilon(1e-12));
        for (std::int64_t x : {0, 1, 2, 5, 10})
            CHECK(std::abs(tab.at(x) - bessel_oracle(x, t)) < 1e-12);
        CHECK(tab.at(3) == tab.at(-3));
    }
}

TEST_CASE("poisson window omits at most tol") {
    for (double t : {0.1, 5.0, 1000.0}) {
        const auto w = poisson_window(t, 1e-12);
        double s = 0.0;
        for (double v : w.weights) s += v;
        // omitted mass <= tol, plus rounding of the weights (lgamma near t = 1000)
        CHECK(s > 1.0 - 1e-12 - 5e-13);
        CHECK(s < 1.0 + 5e-13);
    }
}

TEST_CASE("return probability routes agree with the oracle") {
    const auto k = ssrw();
    const ReturnProbability fourier(k, 5000.0, ReturnProbability::Method::Fourier);
    const ReturnProbability unif(k, 500.0, ReturnProbability::Method::Uniformization);
    for (double u : {0.0, 0.01, 1.0, 7.3, 100.0, 499.0}) {
        CHECK(std::abs(fourier(u) - bessel_oracle(0, u)) < 1e-12);
        CHECK(std::abs(unif(u) - bessel_oracle(0, u)) < 1e-12);
    }
    CHECK(fourier(5000.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi * 5000.0)).epsilon(1e-4));
    // p_0' = (I_1 - I_0) e^{-u} for SSRW
    for (double u : {0.5, 10.0, 300.0}) {
        const double d = bessel_oracle(1, u) - bessel_oracle(0, u);
        CHECK(std::abs(fourier.derivative(u) - d) < 1e-11);
        CHECK(std::abs(unif.derivative(u) - d) < 1e-11);
    }
}

TEST_CASE("wide kernel: the two routes agree") {
    const auto k = wide();
    const ReturnProbability fourier(k, 800.0, ReturnProbability::Method::Fourier);
    const ReturnProbability unif(k, 800.0, ReturnProbability::Method::Uniformization);
    const ReturnProbabilityTable table(k, 800.0);
    for (double u : {0.0, 0.3, 2.0, 50.0, 799.0}) {
        CHECK(std::abs(fourier(u) - unif(u)) < 1e-12);
        CHECK(std::abs(table(u) - unif(u)) < 1e-9 * unif(u) + 1e-12);
    }
    const auto tab = transition_probability(k, 50.0, 1e-13);
    CHECK(std::abs(tab.at(0) - unif(50.0)) < 1e-12);
}
