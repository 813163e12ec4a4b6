#include "rwsbi/heat.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rwsbi/errors.hpp"

namespace rwsbi {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

// Partition of [a, b] refined geometrically toward both ends, pieces at most
// max_piece long. Starts at `first` from each end.
std::vector<double> graded_partition(double a, double b, double first, double max_piece) {
    std::vector<double> left{a};
    std::vector<double> right{b};
    double step = first;
    while (left.back() < right.back()) {
        const double l = std::min(left.back() + step, right.back());
        left.push_back(l);
        if (l >= right.back()) break;
        const double r = std::max(right.back() - step, left.back());
        right.push_back(r);
        if (r <= left.back()) break;
        step = std::min(2.0 * step, max_piece);
    }
    // left ends where right ends; merge without duplicating the meeting point
    while (!right.empty() && right.back() <= left.back()) right.pop_back();
    left.insert(left.end(), right.rbegin(), right.rend());
    return left;
}

template <class F>
double integrate_pieces(F&& f, const std::vector<double>& cuts) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] > cuts[i]) s += gauss<double, 20>::integrate(f, cuts[i], cuts[i + 1]);
    return s;
}

double hermite(double t0, double t1, double y0, double y1, double d0, double d1, double t) {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 +
           (s3 - s2) * h * d1;
}

// Fritsch-Carlson limiter: keeps the Hermite cubic monotone on monotone data.
void limit_slopes(double h, double y0, double y1, double& d0, double& d1) {
    const double delta = (y1 - y0) / h;
    if (delta == 0.0) {
        d0 = d1 = 0.0;
        return;
    }
    if (d0 * delta < 0.0) d0 = 0.0;
    if (d1 * delta < 0.0) d1 = 0.0;
    const double a = d0 / delta;
    const double b = d1 / delta;
    const double r = a * a + b * b;
    if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        d0 = tau * a * delta;
        d1 = tau * b * delta;
    }
}

}  // namespace

HeatParams::HeatParams(double gamma, double alpha, JumpKernel kernel)
    : gamma_(gamma), alpha_(alpha), kernel_(std::move(kernel)) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("HeatParams: gamma must be >= 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("HeatParams: alpha must be > 0");
}

std::int64_t default_radius(const JumpKernel& kernel, double t_max, double factor, double tol, double mass) {
    // Smallest r with mass * 2 exp(-r^2 / (2 (sigma^2 t + m r / 3))) <= tol / 10.
    const double L = std::log(20.0 * std::max(mass, 1.0) / tol);
    const double m = static_cast<double>(kernel.max_jump());
    const double b = 2.0 * L * m / 3.0;
    const double bernstein = 0.5 * (b + std::sqrt(b * b + 8.0 * L * kernel.sigma2() * t_max));
    const double r = std::max(factor * kernel.sigma() * std::sqrt(t_max), bernstein);
    return static_cast<std::int64_t>(std::ceil(r)) + 4 * kernel.max_jump() + 8;
}

std::size_t RhoSolution::locate(double t) const {
    if (t < 0.0 || t > times_.back() * (1.0 + 1e-14))
        throw RangeError("RhoSolution: t outside [0, t_max]");
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t i = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    return std::min(i, times_.size() >= 2 ? times_.size() - 2 : 0);
}

double RhoSolution::rho0(double t) const {
    if (times_.size() == 1) return rho0_[0];
    const std::size_t i = locate(t);
    double d0 = drho0_[i];
    double d1 = drho0_[i + 1];
    limit_slopes(times_[i + 1] - times_[i], rho0_[i], rho0_[i + 1], d0, d1);
    return hermite(times_[i], times_[i + 1], rho0_[i], rho0_[i + 1], d0, d1, t);
}

double RhoSolution::r_integral(double t) const {
    if (times_.size() == 1) return r_int_[0];
    const std::size_t i = locate(t);
    const double g = params_.gamma();
    const double a = params_.alpha();
    double d0 = g * std::exp(-a * rho0_[i]);
    double d1 = g * std::exp(-a * rho0_[i + 1]);
    limit_slopes(times_[i + 1] - times_[i], r_int_[i], r_int_[i + 1], d0, d1);
    return hermite(times_[i], times_[i + 1], r_int_[i], r_int_[i + 1], d0, d1, t);
}

bool RhoSolution::has_profile(double t) const noexcept {
    return std::find(record_times_.begin(), record_times_.end(), t) != record_times_.end();
}

std::span<const double> RhoSolution::profile(double t) const {
    auto it = std::find(record_times_.begin(), record_times_.end(), t);
    if (it == record_times_.end()) throw RangeError("RhoSolution: no stored profile at requested time");
    return profiles_[static_cast<std::size_t>(it - record_times_.begin())];
}

namespace {

// Right-hand side of the truncated lattice system. Layout of y: lattice
// values for x = -r..r, then R_int, then the cumulative boundary outflow.
class HeatRhs {
public:
    HeatRhs(const HeatParams& p, std::int64_t radius)
        : gamma_(p.gamma()), alpha_(p.alpha()), r_(radius), n_(static_cast<std::size_t>(2 * radius + 1)) {
        for (const auto& j : p.kernel().jumps())
            if (j.displacement != 0) jumps_.push_back(j);
        for (const auto& j : jumps_) leave_rate_ += j.probability;
        // Outflow weights for sites near either edge.
        const std::int64_t m = p.kernel().max_jump();
        for (std::int64_t k = 0; k < std::min<std::int64_t>(m, 2 * r_ + 1); ++k) {
            double lo = 0.0;
            double hi = 0.0;
            for (const auto& j : jumps_) {
                if (-r_ + k + j.displacement < -r_) lo += j.probability;
                if (r_ - k + j.displacement > r_) hi += j.probability;
            }
            edge_lo_.push_back(lo);
            edge_hi_.push_back(hi);
        }
    }

    std::size_t size() const noexcept { return n_ + 2; }
    std::size_t center() const noexcept { return static_cast<std::size_t>(r_); }
    double jump_rate() const noexcept { return leave_rate_; }

    void operator()(const std::vector<double>& y, std::vector<double>& out) const {
        out.assign(n_ + 2, 0.0);
        double* o = out.data();
        const double* in = y.data();
        for (std::size_t i = 0; i < n_; ++i) o[i] = -leave_rate_ * in[i];
        for (const auto& j : jumps_) {
            const double p = j.probability;
            // mass moves from i to i + d
            if (j.displacement > 0) {
                const auto d = static_cast<std::size_t>(j.displacement);
                for (std::size_t i = d; i < n_; ++i) o[i] += p * in[i - d];
            } else {
                const auto d = static_cast<std::size_t>(-j.displacement);
                for (std::size_t i = 0; i + d < n_; ++i) o[i] += p * in[i + d];
            }
        }
        const double source = gamma_ * std::exp(-alpha_ * in[center()]);
        o[center()] += source;
        o[n_] = source;
        double flux = 0.0;
        for (std::size_t k = 0; k < edge_lo_.size(); ++k)
            flux += edge_lo_[k] * in[k] + edge_hi_[k] * in[n_ - 1 - k];
        o[n_ + 1] = flux;
    }

private:
    double gamma_;
    double alpha_;
    std::int64_t r_;
    std::size_t n_;
    std::vector<Jump> jumps_;
    double leave_rate_ = 0.0;
    std::vector<double> edge_lo_;
    std::vector<double> edge_hi_;
};

class Rk4 {
public:
    explicit Rk4(const HeatRhs& f) : f_(f) {}

    // y_out = RK4 step of size h from y, with k1 = f(y) supplied.
    void step(const std::vector<double>& y, const std::vector<double>& k1, double h,
              std::vector<double>& y_out) {
        const std::size_t n = y.size();
        tmp_.resize(n);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k1[i];
        f_(tmp_, k2_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k2_[i];
        f_(tmp_, k3_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * k3_[i];
        f_(tmp_, k4_);
        y_out.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            y_out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

private:
    const HeatRhs& f_;
    std::vector<double> tmp_, k2_, k3_, k4_;
};

double lattice_sum(const std::vector<double>& y, std::size_t n) {
    // Neumaier summation; the sum is compared with R_int at 1e-6 or better.
    double s = 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = s + y[i];
        c += std::abs(s) >= std::abs(y[i]) ? (s - t) + y[i] : (y[i] - t) + s;
        s = t;
    }
    return s + c;
}

}  // namespace

RhoSolution solve_rho(const HeatParams& params, const SolveOptions& options) {
    const double t_max = options.t_max;
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw DomainError("solve_rho: t_max must be >= 0");
    if (!(options.tol > 0.0)) throw DomainError("solve_rho: tol must be > 0");
    const std::int64_t radius =
        options.radius ? *options.radius
                       : default_radius(params.kernel(), t_max, options.radius_factor, options.tol,
                                        params.gamma() * t_max);
    if (radius < params.kernel().max_jump()) throw RadiusTooSmall("solve_rho: radius below the jump range");

    RhoSolution sol(params);
    sol.radius_ = radius;
    sol.tol_ = options.tol;

    const HeatRhs rhs(params, radius);
    const std::size_t n_lat = static_cast<std::size_t>(2 * radius + 1);
    const std::size_t c = rhs.center();
    const double h_max = options.max_step_factor / rhs.jump_rate();
    {
        std::ostringstream os;
        os << "RK4 with step doubling; local error (max abs, Richardson) <= " << options.tol
           << "; h <= " << h_max << " (" << options.max_step_factor << "/jump rate)";
        sol.dt_policy_ = os.str();
    }

    std::vector<double> stops = options.record_times;
    stops.push_back(t_max);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
    for (double s : stops)
        if (s < 0.0 || s > t_max) throw DomainError("solve_rho: record time outside [0, t_max]");

    std::vector<double> y(rhs.size(), 0.0);
    std::vector<double> k1, k1_half, full, half, twice;
    rhs(y, k1);

    auto push_point = [&](double t) {
        sol.times_.push_back(t);
        sol.rho0_.push_back(y[c]);
        sol.drho0_.push_back(k1[c]);
        sol.r_sum_.push_back(lattice_sum(y, n_lat));
        sol.r_int_.push_back(y[n_lat]);
    };
    auto record_if_stop = [&](double t, std::size_t& next_stop) {
        while (next_stop < stops.size() && stops[next_stop] <= t) {
            sol.record_times_.push_back(stops[next_stop]);
            sol.profiles_.emplace_back(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n_lat));
            ++next_stop;
        }
    };

    double t = 0.0;
    std::size_t next_stop = 0;
    push_point(0.0);
    record_if_stop(0.0, next_stop);

    Rk4 rk(rhs);
    double h = std::min(1e-3, h_max);
    while (next_stop < stops.size()) {
        if (sol.accepted_ + sol.rejected_ >= options.max_steps)
            throw StepFailure("solve_rho: step budget exhausted at t = " + std::to_string(t));
        const double target = stops[next_stop];
        const bool to_stop = t + h >= target * (1.0 - 1e-15);
        const double step = to_stop ? target - t : h;

        rk.step(y, k1, step, full);
        rk.step(y, k1, 0.5 * step, half);
        rhs(half, k1_half);
        rk.step(half, k1_half, 0.5 * step, twice);

        double err = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(twice[i] - full[i]));
        err /= 15.0;
        if (!std::isfinite(err)) throw StepFailure("solve_rho: non-finite state");

        const double factor = err > 0.0 ? 0.9 * std::pow(options.tol / err, 0.2) : 4.0;
        if (err <= options.tol) {
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = twice[i] + (twice[i] - full[i]) / 15.0;
            t = to_stop ? target : t + step;
            ++sol.accepted_;
            rhs(y, k1);
            push_point(t);
            record_if_stop(t, next_stop);
            if (!to_stop || step >= h) h = std::min(h_max, h * std::clamp(factor, 0.2, 4.0));
        } else {
            ++sol.rejected_;
            h = step * std::clamp(factor, 0.1, 0.9);
            if (h < 1e-13) throw StepFailure("solve_rho: step size underflow at t = " + std::to_string(t));
        }
    }

    // Leak: mass that left through the truncation boundary, plus a Bernstein
    // bound on mass that would sit beyond the radius without truncation.
    const double outflow = y[n_lat + 1];
    const double m = static_cast<double>(params.kernel().max_jump());
    const double var = params.kernel().sigma2() * t_max;
    const double r = static_cast<double>(radius);
    const double tail = r > 0 ? 2.0 * std::exp(-r * r / (2.0 * (var + m * r / 3.0))) : 1.0;
    sol.leak_ = std::max(outflow, y[n_lat] * tail);
    if (sol.leak_ > options.tol)
        throw RadiusTooSmall("solve_rho: boundary leak " + std::to_string(sol.leak_) + " exceeds tol at radius " +
                             std::to_string(radius));
    return sol;
}

RhoSolution solve_rho(const HeatParams& params, double t_max, std::optional<std::int64_t> radius, double tol) {
    SolveOptions o;
    o.t_max = t_max;
    o.radius = radius;
    o.tol = tol;
    return solve_rho(params, o);
}

double VolterraSolution::at(double t) const {
    const double x = t / h;
    const auto i = static_cast<std::size_t>(std::llround(x));
    if (std::abs(x - static_cast<double>(i)) > 1e-9 || i >= rho0.size())
        throw RangeError("VolterraSolution: t is not a grid node");
    return rho0[i];
}

namespace {

std::vector<double> volterra_march(const HeatParams& params, const ReturnProbability& p0, double h, std::size_t n) {
    const double g = params.gamma();
    const double a = params.alpha();
    std::vector<double> lag(n + 1);
    for (std::size_t j = 0; j <= n; ++j) lag[j] = p0.value(static_cast<double>(j) * h);
    std::vector<double> rho(n + 1, 0.0);
    std::vector<double> src(n + 1, 0.0);
    src[0] = std::exp(-a * rho[0]);
    for (std::size_t k = 1; k <= n; ++k) {
        double acc = 0.5 * lag[k] * src[0];
        for (std::size_t j = 1; j < k; ++j) acc += lag[k - j] * src[j];
        const double A = g * h * acc;
        const double B = 0.5 * g * h * lag[0];
        // rho = A + B e^{-a rho}, increasing in rho: Newton from previous value
        double x = rho[k - 1];
        for (int it = 0; it < 50; ++it) {
            const double e = std::exp(-a * x);
            const double F = x - A - B * e;
            const double dF = 1.0 + a * B * e;
            const double dx = F / dF;
            x -= dx;
            if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        rho[k] = x;
        src[k] = std::exp(-a * x);
    }
    return rho;
}

}  // namespace

VolterraSolution solve_rho0_volterra(const HeatParams& params, double t_max, double h) {
    if (!(t_max >= 0.0) || !(h > 0.0)) throw DomainError("solve_rho0_volterra: need t_max >= 0, h > 0");
    const auto n = static_cast<std::size_t>(std::llround(t_max / h));
    if (std::abs(static_cast<double>(n) * h - t_max) > 1e-9 * std::max(1.0, t_max))
        throw DomainError("solve_rho0_volterra: t_max must be a multiple of h");
    const ReturnProbability p0(params.kernel(), t_max, ReturnProbability::Method::Fourier);
    const auto coarse = volterra_march(params, p0, h, n);
    const auto fine = volterra_march(params, p0, 0.5 * h, 2 * n);
    VolterraSolution out;
    out.h = h;
    out.rho0.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out.rho0[k] = (4.0 * fine[2 * k] - coarse[k]) / 3.0;
    return out;
}

double duhamel_residual(const RhoSolution& solution, std::span<const double> sample_times) {
    const auto& p = solution.params();
    if (sample_times.empty()) return 0.0;
    const double t_top = *std::max_element(sample_times.begin(), sample_times.end());
    if (t_top > solution.t_max() * (1.0 + 1e-14)) throw RangeError("duhamel_residual: sample time beyond t_max");
    const auto method = t_top <= 5000.0 ? ReturnProbability::Method::Uniformization : ReturnProbability::Method::Fourier;
    const ReturnProbability p0(p.kernel(), std::max(t_top, 1e-9), method);
    double worst = 0.0;
    for (double t : sample_times) {
        if (t <= 0.0) {
            worst = std::max(worst, std::abs(solution.rho0(0.0)));
            continue;
        }
        auto f = [&](double s) {
            return p0.value(std::max(0.0, t - s)) * std::exp(-p.alpha() * solution.rho0(s));
        };
        const double integral = p.gamma() * integrate_pieces(f, graded_partition(0.0, t, 0.125, 1.0));
        worst = std::max(worst, std::abs(solution.rho0(t) - integral));
    }
    return worst;
}

MassReport total_mass(const RhoSolution& solution, double t) {
    MassReport r;
    r.t = t;
    if (t == 0.0) return r;
    const auto prof = solution.profile(t);
    double s = 0.0;
    double c = 0.0;
    for (double v : prof) {
        const double u = s + v;
        c += std::abs(s) >= std::abs(v) ? (s - u) + v : (v - u) + s;
        s = u;
    }
    r.sum_form = s + c;
    r.integral_form = solution.r_integral(t);
    return r;
}

double max_mass_discrepancy(const RhoSolution& solution) {
    double worst = 0.0;
    const auto a = solution.r_sum_series();
    const auto b = solution.r_integral_series();
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

double asymptotic_rho0(double t, const HeatParams& params) {
    if (!(t > std::numbers::e)) throw DomainError("asymptotic_rho0: requires t > e");
    const double a = params.alpha();
    return (0.5 * std::log(t) - std::log(std::log(t)) +
            std::log(std::sqrt(2.0 * std::numbers::pi) * params.gamma() * a / params.sigma())) /
           a;
}

double asymptotic_R(double t, const HeatParams& params) {
    if (!(t > 1.0)) throw DomainError("asymptotic_R: requires t > 1");
    return params.sigma() / params.alpha() * std::sqrt(2.0 / std::numbers::pi) * std::sqrt(t) * std::log(t);
}

double tilde_rho(double y) { return 0.5 * std::erfc(std::abs(y) / std::numbers::sqrt2); }

double tilde_rho_integral(double y) {
    if (y == 0.0) return 0.5;
    const double y2 = y * y;
    auto f = [y2](double theta) {
        const double s = std::sin(theta);
        return s == 0.0 ? 0.0 : std::exp(-y2 / (2.0 * s * s));
    };
    double err = 0.0;
    const double v = gauss_kronrod<double, 31>::integrate(f, 0.0, std::numbers::pi / 2, 12, 1e-12, &err);
    return v / std::numbers::pi;
}

ProfileSample rescaled_profile(const RhoSolution& solution, double t, std::span<const double> y_grid) {
    if (!(t > std::numbers::e)) throw DomainError("rescaled_profile: requires t > e");
    const auto prof = solution.profile(t);
    const double scale = solution.params().sigma() * std::sqrt(t);
    const double lt = std::log(t);
    ProfileSample out;
    out.t = t;
    for (double y : y_grid) {
        const auto x = static_cast<std::int64_t>(std::trunc(scale * y));
        if (std::abs(x) > solution.radius())
            throw RadiusTooSmall("rescaled_profile: sigma sqrt(t) |y| exceeds the lattice radius");
        const double v = prof[static_cast<std::size_t>(x + solution.radius())] / lt;
        out.y.push_back(y);
        out.scaled.push_back(v);
        out.sup_distance = std::max(out.sup_distance, std::abs(v - tilde_rho(y)));
    }
    return out;
}

bool SubSuperVerdict::all_hold() const noexcept {
    return !points.empty() && std::all_of(points.begin(), points.end(), [](const SubSuperPoint& p) { return p.holds; });
}

SubSuperChecker::SubSuperChecker(const HeatParams& params, double t_max)
    : params_(params), t_max_(t_max), p0_(params.kernel(), t_max) {
    if (params.alpha() != 1.0) throw DomainError("sub/supersolution check requires alpha = 1");
}

double SubSuperChecker::threshold() const noexcept {
    return std::log(std::sqrt(2.0 * std::numbers::pi) * params_.gamma() / params_.sigma());
}

double SubSuperChecker::candidate(double s, double C, double K, double K_prime, SolutionKind kind) const {
    if (s >= K) return 0.5 * std::log(s) - std::log(std::log(s)) + C;
    return kind == SolutionKind::Sub ? -1.0 : K_prime;
}

SubSuperVerdict SubSuperChecker::check(double C, double K, double K_prime, SolutionKind kind,
                                       std::span<const double> t_grid) const {
    const double th = threshold();
    if (kind == SolutionKind::Sub && !(C < th))
        throw ParameterOrderViolated("subsolution requires C < log(sqrt(2 pi) gamma / sigma)");
    if (kind == SolutionKind::Super && !(C > th))
        throw ParameterOrderViolated("supersolution requires C > log(sqrt(2 pi) gamma / sigma)");
    if (!(K > std::numbers::e)) throw DomainError("sub/supersolution check: K must exceed e");
    SubSuperVerdict v;
    v.kind = kind;
    v.C = C;
    v.K = K;
    v.K_prime = K_prime;
    const double g = params_.gamma();
    for (double t : t_grid) {
        if (t > t_max_) throw RangeError("sub/supersolution check: t beyond table range");
        auto integrand = [&](double s) { return p0_(std::max(0.0, t - s)) * std::exp(-candidate(s, C, K, K_prime, kind)); };
        double rhs = 0.0;
        if (t <= K) {
            rhs = g * integrate_pieces(integrand, graded_partition(0.0, t, 0.0625, std::max(1.0, t / 64)));
        } else {
            rhs = g * integrate_pieces(integrand, graded_partition(0.0, K, 0.0625, std::max(1.0, K / 64)));
            rhs += g * integrate_pieces(integrand, graded_partition(K, t, 0.0625, std::max(1.0, t / 64)));
        }
        SubSuperPoint pt;
        pt.t = t;
        pt.f = candidate(t, C, K, K_prime, kind);
        pt.rhs = rhs;
        pt.holds = kind == SolutionKind::Sub ? pt.f < rhs : pt.f > rhs;
        v.points.push_back(pt);
    }
    return v;
}

std::vector<double> log_grid(double a, double b, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {a};
    std::vector<double> g(n);
    const double la = std::log(a);
    const double lb = std::log(b);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(n - 1));
    g.front() = a;
    g.back() = b;
    return g;
}

SubSuperVerdict SubSuperChecker::scan(double C, SolutionKind kind, std::size_t grid_points) const {
    SubSuperVerdict last;
    for (double K = 4.0; K < t_max_ / 2; K *= 1.5) {
        auto grid = log_grid(K / 32, K, 6);
        grid.pop_back();
        for (double t : log_grid(K, t_max_, grid_points)) grid.push_back(t);
        const double fK = 0.5 * std::log(K) - std::log(std::log(K)) + C;
        std::vector<double> levels{-1.0};
        if (kind == SolutionKind::Super) levels = {fK, fK + 0.5, fK + 1.0, fK + 2.0, 2.0 * fK + 2.0};
        for (double level : levels) {
            last = check(C, K, level, kind, grid);
            if (last.all_hold()) return last;
        }
    }
    return last;
}

SubSuperVerdict check_sub_supersolution(const HeatParams& params, double C, double K, double K_prime,
                                        SolutionKind kind, std::span<const double> t_grid) {
    double t_top = K;
    for (double t : t_grid) t_top = std::max(t_top, t);
    const SubSuperChecker checker(params, t_top);
    return checker.check(C, K, K_prime, kind, t_grid);
}

}  // namespace rwsbi
