#include "rwsbi/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <cmath>
#include <cstdlib>
#include <string>

#include "rwsbi/errors.hpp"

namespace rwsbi {

namespace {

double neumaier(std::span<const double> v) {
    double s = 0.0;
    double c = 0.0;
    for (double x : v) {
        const double t = s + x;
        c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    return s + c;
}

}  // namespace

Aggregate aggregate_replicas(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("aggregate_replicas: no values");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    Aggregate a;
    a.n = v.size();
    a.min = v.front();
    a.max = v.back();
    a.mean = neumaier(v) / static_cast<double>(a.n);
    if (a.n >= 2) {
        std::vector<double> sq(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - a.mean) * (v[i] - a.mean);
        std::sort(sq.begin(), sq.end());
        a.variance = neumaier(sq) / static_cast<double>(a.n - 1);
        a.variance_defined = true;
        a.std_error = std::sqrt(a.variance / static_cast<double>(a.n));
    }
    return a;
}

ChiSquareResult chi_square_poisson(std::span<const std::uint64_t> samples, double mean, double min_expected) {
    if (samples.empty()) throw EmptyInput("chi_square_poisson: no samples");
    const double n = static_cast<double>(samples.size());
    const boost::math::poisson_distribution<double> pois(mean);
    const auto cdf = [&](std::uint64_t k) { return boost::math::cdf(pois, static_cast<double>(k)); };
    const auto upper = [&](std::uint64_t k) {  // P(X > k)
        return boost::math::cdf(boost::math::complement(pois, static_cast<double>(k)));
    };
    // Bins [lo, hi]; the last bin is [lo, inf). Each has expected count >= min_expected.
    std::vector<std::uint64_t> lows{0};
    std::vector<double> expected;
    double below = 0.0;  // P(X < current lo)
    for (std::uint64_t k = 0;; ++k) {
        const double in_bin = n * (cdf(k) - below);
        const double rest = n * upper(k);
        if (rest < min_expected) break;
        if (in_bin >= min_expected) {
            expected.push_back(in_bin);
            below = cdf(k);
            lows.push_back(k + 1);
        }
    }
    double last = n * (1.0 - below);
    if (last < min_expected && !expected.empty()) {
        last += expected.back();
        expected.pop_back();
        lows.pop_back();
    }
    expected.push_back(last);
    std::vector<double> observed(expected.size(), 0.0);
    for (auto v : samples) {
        const auto it = std::upper_bound(lows.begin(), lows.end(), v);
        observed[static_cast<std::size_t>(it - lows.begin()) - 1] += 1.0;
    }
    ChiSquareResult r;
    for (std::size_t i = 0; i < expected.size(); ++i)
        r.statistic += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    r.dof = static_cast<int>(expected.size()) - 1;
    if (r.dof < 1) {
        r.p_value = 1.0;
        return r;
    }
    const boost::math::chi_squared_distribution<double> chi(r.dof);
    r.p_value = boost::math::cdf(boost::math::complement(chi, r.statistic));
    return r;
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.empty() || b.empty()) throw EmptyInput("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(x.size());
    const double m = static_cast<double>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() || j < y.size()) {
        double v;
        if (j >= y.size() || (i < x.size() && x[i] <= y[j]))
            v = x[i];
        else
            v = y[j];
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    KsResult r;
    r.statistic = d;
    r.critical = std::sqrt(-std::log(alpha / 2.0) / 2.0) * std::sqrt((n + m) / (n * m));
    return r;
}

CovarianceEstimate covariance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw EmptyInput("covariance: need two equal samples of size >= 2");
    const double ma = aggregate_replicas(a).mean;
    const double mb = aggregate_replicas(b).mean;
    std::vector<double> prod(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) prod[i] = (a[i] - ma) * (b[i] - mb);
    const auto agg = aggregate_replicas(prod);
    CovarianceEstimate c;
    c.covariance = agg.mean * static_cast<double>(a.size()) / static_cast<double>(a.size() - 1);
    c.std_error = agg.std_error;
    return c;
}

std::size_t worker_threads() {
    if (const char* env = std::getenv("RWSBI_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace rwsbi
