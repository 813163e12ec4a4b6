#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace rwsbi {

struct Aggregate {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased; 0 and flagged undefined when n == 1
    bool variance_defined = false;
    double std_error = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Order-independent summary: values are sorted before compensated summation,
/// so any permutation gives bit-identical results. Throws EmptyInput.
Aggregate aggregate_replicas(std::span<const double> values);

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 0.0;
    bool passes(double alpha) const noexcept { return p_value >= alpha; }
};
/// Goodness of fit of integer samples to Poisson(mean). Bins with expected
/// count below min_expected are merged into the tails.
ChiSquareResult chi_square_poisson(std::span<const std::uint64_t> samples, double mean, double min_expected = 5.0);

struct KsResult {
    double statistic = 0.0;
    double critical = 0.0;  // c(alpha) sqrt((n+m)/(nm))
    bool passes() const noexcept { return statistic <= critical; }
};
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha);

struct CovarianceEstimate {
    double covariance = 0.0;
    double std_error = 0.0;  // sd of the centered products / sqrt(n)
};
CovarianceEstimate covariance(std::span<const double> a, std::span<const double> b);

/// Worker count: RWSBI_THREADS if set, else hardware concurrency (>= 1).
std::size_t worker_threads();

/// Runs fn(0..n-1) and returns results by index. Work is split across
/// worker_threads(); the output does not depend on the thread count as long
/// as fn(i) depends only on i. The first exception is rethrown.
template <class F>
auto run_replicas(std::size_t n, F&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using R = decltype(fn(std::size_t{}));
    std::vector<R> out(n);
    const std::size_t workers = std::min(worker_threads(), n == 0 ? std::size_t{1} : n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace rwsbi
