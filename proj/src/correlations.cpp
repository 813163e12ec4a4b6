#include "rwsbi/correlations.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rwsbi/errors.hpp"
#include "rwsbi/rng.hpp"
#include "rwsbi/stats.hpp"

namespace rwsbi {

namespace {

constexpr int kMaxMaskK = 24;

int popcount(std::uint32_t m) { return std::popcount(m); }

double atom_tolerance(const std::vector<double>& nu) {
    double scale = 0.0;
    for (double v : nu) scale = std::max(scale, v);
    return 1e-12 * std::max(1.0, scale);
}

}  // namespace

VacancySpec::VacancySpec(int k, std::vector<double> nu) : k_(k), nu_(std::move(nu)) {
    if (k < 1 || k > kMaxMaskK) throw InvalidSpec("VacancySpec: k must be in [1, 24]");
    const std::size_t n = std::size_t{1} << k;
    if (nu_.size() != n) throw InvalidSpec("VacancySpec: table must have 2^k entries");
    nu_[0] = 0.0;
    for (std::size_t m = 1; m < n; ++m)
        if (!std::isfinite(nu_[m]) || nu_[m] < 0.0)
            throw InvalidSpec("VacancySpec: nu must be finite and >= 0 (mask " + std::to_string(m) + ")");
    const double tol = atom_tolerance(nu_);
    for (std::size_t m = 1; m < n; ++m)
        for (int b = 0; b < k; ++b)
            if (!(m >> b & 1u) && nu_[m | (std::size_t{1} << b)] > nu_[m] + tol)
                throw UnrealizableSpec("VacancySpec: nu is not monotone under intersection");
    // atoms by superset Moebius inversion
    atoms_ = nu_;
    for (int b = 0; b < k; ++b)
        for (std::size_t m = 0; m < n; ++m)
            if (!(m >> b & 1u)) atoms_[m] -= atoms_[m | (std::size_t{1} << b)];
    atoms_[0] = 0.0;
    for (std::size_t m = 1; m < n; ++m) {
        if (atoms_[m] < -tol)
            throw UnrealizableSpec("VacancySpec: atom " + std::to_string(m) + " has negative mass " +
                                   std::to_string(atoms_[m]));
        atoms_[m] = std::max(0.0, atoms_[m]);
    }
}

VacancySpec VacancySpec::from_atoms(int k, const std::vector<double>& atoms) {
    if (k < 1 || k > kMaxMaskK) throw InvalidSpec("VacancySpec: k must be in [1, 24]");
    const std::size_t n = std::size_t{1} << k;
    if (atoms.size() != n) throw InvalidSpec("VacancySpec::from_atoms: need 2^k entries");
    std::vector<double> nu = atoms;
    nu[0] = 0.0;
    for (int b = 0; b < k; ++b)
        for (std::size_t m = 0; m < n; ++m)
            if (!(m >> b & 1u)) nu[m] += nu[m | (std::size_t{1} << b)];
    return VacancySpec(k, std::move(nu));
}

double VacancySpec::singleton_sum() const {
    double s = 0.0;
    for (int i = 0; i < k_; ++i) s += nu_[1u << i];
    return s;
}

double VacancySpec::max_pairwise() const {
    double m = 0.0;
    for (int i = 0; i < k_; ++i)
        for (int j = i + 1; j < k_; ++j) m = std::max(m, nu_[(1u << i) | (1u << j)]);
    return m;
}

VacancySpec VacancySpec::permuted(const std::vector<int>& perm) const {
    if (perm.size() != static_cast<std::size_t>(k_)) throw InvalidSpec("permuted: wrong permutation size");
    std::vector<double> nu(nu_.size());
    for (std::uint32_t m = 1; m < nu_.size(); ++m) {
        std::uint32_t old = 0;
        for (int i = 0; i < k_; ++i)
            if (m >> i & 1u) old |= 1u << perm[static_cast<std::size_t>(i)];
        nu[m] = nu_[old];
    }
    return VacancySpec(k_, std::move(nu));
}

VacancySpec VacancySpec::scaled_intersections(double s) const {
    std::vector<double> nu = nu_;
    for (std::uint32_t m = 1; m < nu.size(); ++m)
        if (popcount(m) >= 2) nu[m] *= s;
    return VacancySpec(k_, std::move(nu));
}

VacancySpec parse_vacancy_spec(std::istream& in) {
    std::vector<std::pair<std::uint32_t, double>> entries;
    int k = 0;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& what) {
            throw InvalidSpec("vacancy spec line " + std::to_string(lineno) + ": " + what);
        };
        const auto colon = line.find(':');
        const auto eq = line.find('=');
        if (colon == std::string::npos || eq == std::string::npos || eq < colon) fail("expected `I:i,j,... = value`");
        std::string head = line.substr(0, colon);
        head.erase(std::remove_if(head.begin(), head.end(), ::isspace), head.end());
        if (head != "I") fail("expected `I:` prefix");
        std::uint32_t mask = 0;
        std::stringstream idx(line.substr(colon + 1, eq - colon - 1));
        std::string tok;
        while (std::getline(idx, tok, ',')) {
            std::size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(tok, &used);
            } catch (const std::exception&) {
                fail("bad index '" + tok + "'");
            }
            if (tok.find_first_not_of(" \t", used) != std::string::npos) fail("bad index '" + tok + "'");
            if (v < 1 || v > kMaxMaskK) fail("index out of range");
            if (mask >> (v - 1) & 1u) fail("repeated index");
            mask |= 1u << (v - 1);
            k = std::max(k, v);
        }
        if (mask == 0) fail("empty index set");
        double value = 0.0;
        try {
            std::size_t used = 0;
            const std::string rhs = line.substr(eq + 1);
            value = std::stod(rhs, &used);
            if (rhs.find_first_not_of(" \t\r", used) != std::string::npos) fail("trailing characters");
        } catch (const InvalidSpec&) {
            throw;
        } catch (const std::exception&) {
            fail("bad value");
        }
        for (const auto& [m, v] : entries)
            if (m == mask) fail("duplicate set");
        entries.emplace_back(mask, value);
    }
    if (k == 0) throw InvalidSpec("vacancy spec: no entries");
    std::vector<double> nu(std::size_t{1} << k, 0.0);
    std::vector<bool> seen(nu.size(), false);
    for (const auto& [m, v] : entries) {
        nu[m] = v;
        seen[m] = true;
    }
    for (int i = 0; i < k; ++i)
        if (!seen[1u << i]) throw InvalidSpec("vacancy spec: missing singleton I:" + std::to_string(i + 1));
    return VacancySpec(k, std::move(nu));
}

VacancySpec load_vacancy_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidSpec("cannot open vacancy spec '" + path + "'");
    return parse_vacancy_spec(in);
}

double correlation_exact(const VacancySpec& spec) {
    const int k = spec.k();
    if (k > 20) throw KTooLarge("correlation_exact: k = " + std::to_string(k) + " exceeds 20");
    const std::size_t n = std::size_t{1} << k;
    // g[I'] = sum over I subset of I', |I| >= 2, of (-1)^{|I|} nu(I)
    std::vector<double> g(n, 0.0);
    for (std::uint32_t m = 1; m < n; ++m)
        if (popcount(m) >= 2) g[m] = (popcount(m) % 2 == 0 ? 1.0 : -1.0) * spec.nu(m);
    for (int b = 0; b < k; ++b)
        for (std::size_t m = 0; m < n; ++m)
            if (m >> b & 1u) g[m] += g[m ^ (std::size_t{1} << b)];
    double sum = 0.0;
    double comp = 0.0;
    for (std::uint32_t m = 0; m < n; ++m) {
        const double term = ((k - popcount(m)) % 2 == 0 ? 1.0 : -1.0) * std::exp(g[m]);
        const double t = sum + term;
        comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
    }
    return std::exp(-spec.singleton_sum()) * (sum + comp);
}

SeriesResult correlation_series(const VacancySpec& spec, int M) {
    const int k = spec.k();
    if (k > 8) throw KTooLarge("correlation_series: k = " + std::to_string(k) + " exceeds 8");
    if (M < 0) throw DomainError("correlation_series: M must be >= 0");
    const std::uint32_t full = spec.full_mask();
    std::vector<std::pair<std::uint32_t, double>> weights;
    for (std::uint32_t m = 1; m <= full; ++m)
        if (popcount(m) >= 2 && spec.nu(m) != 0.0)
            weights.emplace_back(m, (popcount(m) % 2 == 0 ? 1.0 : -1.0) * spec.nu(m));
    // cur[u] = (1/n!) * signed sum over ordered n-tuples with union u
    std::vector<double> cur(full + 1, 0.0);
    std::vector<double> next(full + 1, 0.0);
    cur[0] = 1.0;
    double total = 0.0;
    for (int n = 1; n <= M; ++n) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::uint32_t u = 0; u <= full; ++u) {
            if (cur[u] == 0.0) continue;
            for (const auto& [m, w] : weights) next[u | m] += cur[u] * w;
        }
        const double inv = 1.0 / n;
        for (auto& v : next) v *= inv;
        std::swap(cur, next);
        total += cur[full];
    }
    SeriesResult r;
    r.value = std::exp(-spec.singleton_sum()) * total;
    const double x = std::ldexp(spec.max_pairwise(), k);
    r.remainder_bound =
        std::ldexp(std::exp((M + 1) * std::log(x) - std::lgamma(M + 2.0) + x), k);
    if (x == 0.0) r.remainder_bound = 0.0;
    return r;
}

int series_order_for(const VacancySpec& spec, double target, int max_order) {
    const double x = std::ldexp(spec.max_pairwise(), spec.k());
    if (x == 0.0) return spec.k();
    const double scale = std::exp(-spec.singleton_sum());
    for (int M = spec.k(); M <= max_order; ++M) {
        const double bound = std::ldexp(std::exp((M + 1) * std::log(x) - std::lgamma(M + 2.0) + x), spec.k());
        if (scale * bound < target) return M;
    }
    throw DomainError("series_order_for: no order up to " + std::to_string(max_order) + " reaches the target");
}

MonteCarloEstimate correlation_montecarlo(const VacancySpec& spec, std::uint64_t replicas, std::uint64_t seed) {
    if (replicas < 2) throw DomainError("correlation_montecarlo: need at least 2 replicas");
    const int k = spec.k();
    std::vector<std::pair<std::uint32_t, double>> atoms;
    for (std::uint32_t m = 1; m <= spec.full_mask(); ++m)
        if (spec.atoms()[m] > 0.0) atoms.emplace_back(m, spec.atoms()[m]);
    std::vector<double> p(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) p[static_cast<std::size_t>(i)] = std::exp(-spec.nu(1u << i));

    constexpr std::uint64_t kBlock = 16384;
    const std::size_t blocks = static_cast<std::size_t>((replicas + kBlock - 1) / kBlock);
    struct Partial {
        double n = 0.0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    const auto parts = run_replicas(blocks, [&](std::size_t b) {
        Rng rng = RngStream{seed, b}.engine();
        const std::uint64_t lo = b * kBlock;
        const std::uint64_t hi = std::min(replicas, lo + kBlock);
        Partial part;
        for (std::uint64_t r = lo; r < hi; ++r) {
            std::uint32_t hit = 0;
            for (const auto& [m, a] : atoms)
                if (rng.poisson(a) > 0) hit |= m;
            double prod = 1.0;
            for (int i = 0; i < k; ++i)
                prod *= ((hit >> i & 1u) ? 0.0 : 1.0) - p[static_cast<std::size_t>(i)];
            part.n += 1.0;
            const double d = prod - part.mean;
            part.mean += d / part.n;
            part.m2 += d * (prod - part.mean);
        }
        return part;
    });
    Partial all;
    for (const auto& q : parts) {  // pairwise combination, fixed order
        const double n = all.n + q.n;
        const double d = q.mean - all.mean;
        all.mean += d * q.n / n;
        all.m2 += q.m2 + d * d * all.n * q.n / n;
        all.n = n;
    }
    MonteCarloEstimate est;
    est.replicas = replicas;
    est.estimate = all.mean;
    est.std_error = std::sqrt(all.m2 / (all.n - 1.0) / all.n);
    return est;
}

}  // namespace rwsbi
