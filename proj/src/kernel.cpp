#include "rwsbi/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "rwsbi/errors.hpp"

namespace rwsbi {

namespace {

constexpr double kKernelTol = 1e-12;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

double JumpKernel::probability(std::int64_t x) const noexcept {
    auto it = std::lower_bound(jumps_.begin(), jumps_.end(), x,
                               [](const Jump& j, std::int64_t v) { return j.displacement < v; });
    return (it != jumps_.end() && it->displacement == x) ? it->probability : 0.0;
}

double JumpKernel::characteristic(double k, double* imag) const noexcept {
    double re = 0.0;
    double im = 0.0;
    for (const auto& j : jumps_) {
        const double arg = k * static_cast<double>(j.displacement);
        re += j.probability * std::cos(arg);
        im += j.probability * std::sin(arg);
    }
    if (imag != nullptr) *imag = im;
    return re;
}

std::string JumpKernel::describe() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < jumps_.size(); ++i) {
        if (i) os << ';';
        os << jumps_[i].displacement << ':' << jumps_[i].probability;
    }
    return os.str();
}

std::int64_t JumpKernel::sample(Rng& rng) const noexcept {
    const double u = rng.uniform();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    if (idx >= jumps_.size()) idx = jumps_.size() - 1;
    return jumps_[idx].displacement;
}

JumpKernel validate_kernel(std::span<const Jump> raw) {
    if (raw.empty()) throw NotAProbability("kernel: empty offset list");
    std::map<std::int64_t, double> merged;
    for (const auto& j : raw) {
        if (!std::isfinite(j.probability) || j.probability < 0.0 || j.probability > 1.0)
            throw NotAProbability("kernel: probability of offset " + std::to_string(j.displacement) +
                                  " is " + fmt(j.probability) + ", not in [0,1]");
        merged[j.displacement] += j.probability;
    }
    JumpKernel k;
    double total = 0.0;
    double mean = 0.0;
    double second = 0.0;
    for (const auto& [d, p] : merged) {
        if (p > 1.0 + kKernelTol)
            throw NotAProbability("kernel: merged probability of offset " + std::to_string(d) +
                                  " exceeds 1");
        if (p == 0.0) continue;
        k.jumps_.push_back({d, p});
        const auto x = static_cast<double>(d);
        total += p;
        mean += x * p;
        second += x * x * p;
    }
    if (std::abs(total - 1.0) > kKernelTol)
        throw NotAProbability("kernel: probabilities sum to " + fmt(total) + ", not 1");
    if (std::abs(mean) > kKernelTol)
        throw NonZeroMean("kernel: mean sum x a_x = " + fmt(mean) + ", must be 0");
    const double var = second - mean * mean;
    if (k.jumps_.size() < 2 || !(var > 0.0) || !std::isfinite(var))
        throw NonFiniteVariance("kernel: variance " + fmt(var) + " not in (0, inf)");
    k.sigma2_ = var;
    k.sigma_ = std::sqrt(var);
    double acc = 0.0;
    for (const auto& j : k.jumps_) {
        acc += j.probability;
        k.cumulative_.push_back(acc);
        k.max_jump_ = std::max(k.max_jump_, std::abs(j.displacement));
    }
    k.cumulative_.back() = 1.0;
    k.symmetric_ = std::all_of(k.jumps_.begin(), k.jumps_.end(), [&](const Jump& j) {
        return std::abs(k.probability(-j.displacement) - j.probability) <= kKernelTol;
    });
    return k;
}

JumpKernel ssrw() {
    const Jump raw[] = {{-1, 0.5}, {1, 0.5}};
    return validate_kernel(raw);
}

JumpKernel parse_kernel(std::string_view text) {
    std::vector<Jump> raw;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::int64_t d;
        double p;
        if (!(ls >> d)) {
            std::string rest;
            if (std::istringstream(line) >> rest)
                throw KernelParseError("kernel file line " + std::to_string(lineno) +
                                       ": expected `offset probability`");
            continue;
        }
        if (!(ls >> p))
            throw KernelParseError("kernel file line " + std::to_string(lineno) +
                                   ": missing probability");
        std::string extra;
        if (ls >> extra)
            throw KernelParseError("kernel file line " + std::to_string(lineno) +
                                   ": trailing text '" + extra + "'");
        raw.push_back({d, p});
    }
    return validate_kernel(raw);
}

JumpKernel load_kernel(const std::string& path_or_name) {
    if (path_or_name == "ssrw") return ssrw();
    std::ifstream in(path_or_name);
    if (!in) throw KernelParseError("cannot open kernel file '" + path_or_name + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_kernel(buf.str());
}

std::int64_t sample_jump(const JumpKernel& kernel, Rng& rng) { return kernel.sample(rng); }

double TransitionTable::at(std::int64_t x) const noexcept {
    if (x < min_x || x > max_x()) return 0.0;
    return values[static_cast<std::size_t>(x - min_x)];
}

double TransitionTable::total() const noexcept {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

PoissonWindow poisson_window(double t, double tol) {
    PoissonWindow w;
    if (t <= 0.0) {
        w.weights = {1.0};
        return w;
    }
    const auto mode = static_cast<std::uint64_t>(std::floor(t));
    const double log_mode =
        -t + static_cast<double>(mode) * std::log(t) - std::lgamma(static_cast<double>(mode) + 1.0);
    const double w_mode = std::exp(log_mode);
    const double half = 0.5 * tol;

    std::vector<double> right;  // n = mode+1, mode+2, ...
    double term = w_mode;
    for (std::uint64_t n = mode;; ++n) {
        const double r = t / static_cast<double>(n + 1);
        if (r < 1.0 && term * r / (1.0 - r) < half) break;
        term *= r;
        right.push_back(term);
    }
    std::vector<double> left;  // n = mode-1, mode-2, ...
    term = w_mode;
    for (std::uint64_t n = mode; n > 0; --n) {
        const double r = static_cast<double>(n) / t;
        if (r < 1.0 && term * r / (1.0 - r) < half) break;
        term *= r;
        left.push_back(term);
    }
    w.lo = mode - left.size();
    w.hi = mode + right.size();
    w.weights.reserve(left.size() + 1 + right.size());
    w.weights.assign(left.rbegin(), left.rend());
    w.weights.push_back(w_mode);
    w.weights.insert(w.weights.end(), right.begin(), right.end());
    return w;
}

namespace {

// b = a * kernel, where a covers [a_min, a_min + a.size()).
void convolve_step(const JumpKernel& kernel, const std::vector<double>& a, std::vector<double>& b,
                   std::int64_t dmin, std::int64_t dmax) {
    const std::size_t width = static_cast<std::size_t>(dmax - dmin);
    b.assign(a.size() + width, 0.0);
    for (const auto& j : kernel.jumps()) {
        const auto off = static_cast<std::size_t>(j.displacement - dmin);
        const double p = j.probability;
        for (std::size_t i = 0; i < a.size(); ++i) b[i + off] += p * a[i];
    }
}

}  // namespace

TransitionTable transition_probability(const JumpKernel& kernel, double t, double tol) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("transition_probability: t must be >= 0");
    if (!(tol > 0.0 && tol < 1.0)) throw DomainError("transition_probability: tol must be in (0,1)");
    const auto win = poisson_window(t, tol);
    const std::int64_t dmin = kernel.jumps().front().displacement;
    const std::int64_t dmax = kernel.jumps().back().displacement;

    TransitionTable table;
    table.t = t;
    table.truncation_tol = tol;
    table.n_lo = win.lo;
    table.n_hi = win.hi;
    const auto hi = static_cast<std::int64_t>(win.hi);
    table.min_x = hi * dmin;
    table.values.assign(static_cast<std::size_t>(hi * (dmax - dmin) + 1), 0.0);

    std::vector<double> power{1.0};  // a^{*n} on [n*dmin, n*dmax]
    std::vector<double> next;
    for (std::uint64_t n = 0; n <= win.hi; ++n) {
        if (n >= win.lo) {
            const double w = win.weights[n - win.lo];
            const auto offset = static_cast<std::size_t>(static_cast<std::int64_t>(n) * dmin - table.min_x);
            for (std::size_t i = 0; i < power.size(); ++i) table.values[offset + i] += w * power[i];
        }
        if (n < win.hi) {
            convolve_step(kernel, power, next, dmin, dmax);
            power.swap(next);
        }
    }
    return table;
}

ReturnProbability::ReturnProbability(const JumpKernel& kernel, double u_max, Method method, double tol)
    : method_(method), u_max_(u_max), tol_(tol), sigma2_(kernel.sigma2()), max_jump_(kernel.max_jump()) {
    if (!(u_max >= 0.0) || !std::isfinite(u_max)) throw DomainError("ReturnProbability: bad u_max");
    if (method_ == Method::Uniformization) {
        const auto win = poisson_window(u_max, tol);
        const std::uint64_t n_max = win.hi + 1;
        const std::int64_t dmin = kernel.jumps().front().displacement;
        const std::int64_t dmax = kernel.jumps().back().displacement;
        c_.reserve(n_max + 1);
        std::vector<double> power{1.0};
        std::vector<double> next;
        for (std::uint64_t n = 0; n <= n_max; ++n) {
            const auto idx = -static_cast<std::int64_t>(n) * dmin;
            c_.push_back(idx >= 0 && idx < static_cast<std::int64_t>(power.size())
                             ? power[static_cast<std::size_t>(idx)]
                             : 0.0);
            convolve_step(kernel, power, next, dmin, dmax);
            power.swap(next);
        }
    } else {
        const std::size_t m = fourier_points(u_max);
        g_.resize(2 * m);
        for (std::size_t j = 0; j < m; ++j) {
            const double k = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
            double im = 0.0;
            const double re = kernel.characteristic(k, &im);
            g_[2 * j] = 1.0 - re;
            g_[2 * j + 1] = -im;
        }
    }
}

std::size_t ReturnProbability::fourier_points(double u) const {
    // Bernstein: P(|X_u| >= r) <= 2 exp(-r^2 / (2 (sigma2 u + m r / 3))).
    const double L = std::log(2.0 / tol_) + 5.0;
    const double m = static_cast<double>(max_jump_);
    const double b = 2.0 * L * m / 3.0;
    const double r = 0.5 * (b + std::sqrt(b * b + 8.0 * L * sigma2_ * u));
    std::size_t points = 16;
    while (static_cast<double>(points) < 2.0 * r + 2.0) points *= 2;
    return points;
}

double ReturnProbability::value(double u) const {
    if (u < 0.0 || u > u_max_ * (1.0 + 1e-12))
        throw DomainError("ReturnProbability: u outside [0, u_max]");
    if (method_ == Method::Uniformization) {
        const auto win = poisson_window(u, tol_);
        double s = 0.0;
        for (std::uint64_t n = win.lo; n <= win.hi; ++n) s += win.weights[n - win.lo] * c_[n];
        return s;
    }
    const std::size_t m_max = g_.size() / 2;
    const std::size_t m = std::min(m_max, fourier_points(u));
    const std::size_t stride = m_max / m;
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double zr = g_[2 * j * stride];
        const double zi = g_[2 * j * stride + 1];
        s += zi == 0.0 ? std::exp(-u * zr) : std::exp(-u * zr) * std::cos(u * zi);
    }
    return s / static_cast<double>(m);
}

double ReturnProbability::derivative(double u) const {
    if (u < 0.0 || u > u_max_ * (1.0 + 1e-12))
        throw DomainError("ReturnProbability: u outside [0, u_max]");
    if (method_ == Method::Uniformization) {
        const auto win = poisson_window(u, tol_);
        double s = 0.0;
        for (std::uint64_t n = win.lo; n <= win.hi; ++n)
            s += win.weights[n - win.lo] * (c_[n + 1] - c_[n]);
        return s;
    }
    const std::size_t m_max = g_.size() / 2;
    const std::size_t m = std::min(m_max, fourier_points(u));
    const std::size_t stride = m_max / m;
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double zr = g_[2 * j * stride];
        const double zi = g_[2 * j * stride + 1];
        const double e = std::exp(-u * zr);
        s -= zi == 0.0 ? zr * e : e * (zr * std::cos(u * zi) + zi * std::sin(u * zi));
    }
    return s / static_cast<double>(m);
}

namespace {
constexpr double kTableSplit = 16.0;
constexpr double kTableFine = 1.0 / 64.0;
constexpr double kTableRatio = 1.004;
}  // namespace

ReturnProbabilityTable::ReturnProbabilityTable(const JumpKernel& kernel, double u_max) : u_max_(u_max) {
    const ReturnProbability p(kernel, std::max(u_max, kTableSplit) * kTableRatio * kTableRatio,
                              ReturnProbability::Method::Fourier);
    for (int i = 0; i * kTableFine <= kTableSplit; ++i) nodes_.push_back(i * kTableFine);
    for (double u = kTableSplit * kTableRatio; nodes_.back() < u_max; u *= kTableRatio) nodes_.push_back(u);
    for (double u : nodes_) {
        values_.push_back(p.value(u));
        slopes_.push_back(p.derivative(u));
    }
}

double ReturnProbabilityTable::operator()(double u) const {
    if (u < 0.0 || u > nodes_.back()) throw DomainError("ReturnProbabilityTable: u out of range");
    std::size_t i;
    const auto fine_nodes = static_cast<std::size_t>(kTableSplit / kTableFine);
    if (u <= kTableSplit) {
        i = std::min(static_cast<std::size_t>(u / kTableFine), fine_nodes - 1);
    } else {
        i = fine_nodes + static_cast<std::size_t>(std::log(u / kTableSplit) / std::log(kTableRatio));
        while (i + 1 < nodes_.size() && nodes_[i + 1] < u) ++i;
        while (i > 0 && nodes_[i] > u) --i;
    }
    i = std::min(i, nodes_.size() - 2);
    const double h = nodes_[i + 1] - nodes_[i];
    const double s = (u - nodes_[i]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * values_[i] + (s3 - 2 * s2 + s) * h * slopes_[i] +
           (-2 * s3 + 3 * s2) * values_[i + 1] + (s3 - s2) * h * slopes_[i + 1];
}

}  // namespace rwsbi
