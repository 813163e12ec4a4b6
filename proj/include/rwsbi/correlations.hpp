#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rwsbi {

/// Intensity masses nu(E_I) = nu(intersection of E_l, l in I) for every
/// nonempty I of {1..k}, indexed by bitmask (bit l-1 for event l).
///
/// Construction validates monotonicity and that every atom of the algebra
/// generated by E_1..E_k gets nonnegative mass (Moebius inversion).
class VacancySpec {
public:
    /// nu has size 2^k; nu[0] is ignored. Throws InvalidSpec for bad sizes or
    /// negative / nonfinite values, UnrealizableSpec for a nonmonotone table
    /// or a negative atom.
    VacancySpec(int k, std::vector<double> nu);

    /// Spec generated by disjoint atoms: atoms[S] is the mass of the points
    /// lying in exactly the events of S.
    static VacancySpec from_atoms(int k, const std::vector<double>& atoms);

    int k() const noexcept { return k_; }
    std::uint32_t full_mask() const noexcept { return (1u << k_) - 1; }
    double nu(std::uint32_t mask) const { return nu_.at(mask); }
    const std::vector<double>& nu_table() const noexcept { return nu_; }
    /// Mass of the atom "in exactly the events of S".
    const std::vector<double>& atoms() const noexcept { return atoms_; }
    double singleton_sum() const;
    double max_pairwise() const;

    /// Same table with events relabeled: new event i is old event perm[i] (0-based).
    VacancySpec permuted(const std::vector<int>& perm) const;
    /// Intersection masses with |I| >= 2 multiplied by s.
    VacancySpec scaled_intersections(double s) const;

private:
    int k_;
    std::vector<double> nu_;
    std::vector<double> atoms_;
};

/// Parses lines `I:1,2 = 0.5` (`#` starts a comment). k is the largest
/// index; unspecified intersections default to 0, singletons are required.
VacancySpec parse_vacancy_spec(std::istream& in);
VacancySpec load_vacancy_spec(const std::string& path);

/// Closed inclusion-exclusion form over the 2^k subsets. KTooLarge above k = 20.
double correlation_exact(const VacancySpec& spec);

struct SeriesResult {
    double value = 0.0;            // includes the factor e^{-sum nu(E_i)}
    double remainder_bound = 0.0;  // 2^k |x|^{M+1}/(M+1)! e^{|x|}, before that factor
};

/// Cover sum truncated at n <= M. KTooLarge above k = 8.
SeriesResult correlation_series(const VacancySpec& spec, int M);

/// Smallest M >= k whose remainder bound times e^{-sum nu} is below target.
int series_order_for(const VacancySpec& spec, double target, int max_order = 5000);

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::uint64_t replicas = 0;
};

/// Independent Poisson counts on the atoms, centered product of the vacancy
/// indicators. Deterministic in (seed, replicas) regardless of threads.
MonteCarloEstimate correlation_montecarlo(const VacancySpec& spec, std::uint64_t replicas, std::uint64_t seed);

}  // namespace rwsbi
