#include "rwsbi/experiments.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "rwsbi/correlations.hpp"
#include "rwsbi/couplings.hpp"
#include "rwsbi/errors.hpp"
#include "rwsbi/heat.hpp"

namespace rwsbi {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec == std::errc() && p == end) return out;
    // allow 1e5 style integers
    const double d = parse_double(key, v);
    if (d < 0 || d != std::floor(d) || d > 1.8e19)
        throw ConfigError("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(d);
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

// ---------------------------------------------------------------- config

void ExperimentConfig::set(const std::string& key_in, const std::string& value_in) {
    const std::string key = trim(key_in);
    const std::string value = trim(value_in);
    if (key == "suite") {
        suite = value;
    } else if (key == "kernel") {
        kernel = value;
    } else if (key == "gamma") {
        gamma = parse_double(key, value);
    } else if (key == "alpha") {
        alpha = parse_double(key, value);
    } else if (key == "epsilon") {
        epsilon = parse_double(key, value);
    } else if (key == "sign") {
        if (value == "+" || value == "plus")
            sign = Sign::Plus;
        else if (value == "-" || value == "minus")
            sign = Sign::Minus;
        else
            throw ConfigError("config: sign must be plus or minus, got '" + value + "'");
    } else if (key == "t_max") {
        t_max = parse_double(key, value);
    } else if (key == "n_max") {
        n_max = parse_uint(key, value);
    } else if (key == "replicas") {
        replicas = parse_uint(key, value);
    } else if (key == "seed") {
        seed = parse_uint(key, value);
    } else if (key == "output_dir") {
        output_dir = value;
    } else if (key.rfind("tol.", 0) == 0) {
        const std::string name = key.substr(4);
        if (!default_tolerances().count(name)) throw ConfigError("config: unknown tolerance '" + name + "'");
        tolerances[name] = parse_double(key, value);
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        c.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse(in);
}

void ExperimentConfig::apply_environment() {
    if (const char* dir = std::getenv("RWSBI_OUTPUT_DIR"); dir && *dir) output_dir = dir;
}

void ExperimentConfig::validate() const {
    const auto suites = available_suites();
    if (std::find(suites.begin(), suites.end(), suite) == suites.end()) {
        std::string list;
        for (const auto& s : suites) list += (list.empty() ? "" : ", ") + s;
        throw ConfigError("unknown suite '" + suite + "'; available: " + list);
    }
    if (kernel != "ssrw" && !std::filesystem::exists(kernel))
        throw ConfigError("config: kernel file '" + kernel + "' does not exist");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("config: gamma must be >= 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("config: alpha must be > 0");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("config: epsilon must be in [0, 1)");
    if (t_max && !(*t_max > 0.0 && std::isfinite(*t_max))) throw ConfigError("config: t_max must be > 0");
    if (n_max && *n_max < 1) throw ConfigError("config: n_max must be >= 1");
    if (replicas && *replicas < 2) throw ConfigError("config: replicas must be >= 2");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
    std::vector<std::pair<std::string, std::string>> e;
    e.emplace_back("suite", suite);
    e.emplace_back("kernel", kernel);
    e.emplace_back("gamma", format_number(gamma));
    e.emplace_back("alpha", format_number(alpha));
    e.emplace_back("epsilon", format_number(epsilon));
    e.emplace_back("sign", sign == Sign::Plus ? "plus" : "minus");
    e.emplace_back("t_max", t_max ? format_number(*t_max) : "default");
    e.emplace_back("n_max", n_max ? std::to_string(*n_max) : "default");
    e.emplace_back("replicas", replicas ? std::to_string(*replicas) : "default");
    e.emplace_back("seed", std::to_string(seed));
    e.emplace_back("tolerance_table", kToleranceTableVersion);
    for (const auto& [k, v] : tolerances) e.emplace_back("tol." + k, format_number(v));
    return e;
}

double ExperimentConfig::tolerance(const std::string& name) const {
    if (auto it = tolerances.find(name); it != tolerances.end()) return it->second;
    const auto& table = default_tolerances();
    auto it = table.find(name);
    if (it == table.end()) throw ConfigError("no tolerance named '" + name + "'");
    return it->second.value;
}

const std::map<std::string, ToleranceEntry>& default_tolerances() {
    // "pilot" brackets are committed desk-scale brackets; do not retune them
    // to make a run pass.
    static const std::map<std::string, ToleranceEntry> table{
        {"smoke.runtime", {10.0, "bounded work"}},
        {"ac1.mass_residual", {1e-6, "criterion"}},
        {"ac1.duhamel_residual", {1e-5, "criterion"}},
        {"ac1.stepper_agreement", {1e-5, "criterion"}},
        {"ac1.runtime", {60.0, "criterion"}},
        {"ac2.profile_identity", {1e-8, "criterion"}},
        {"ac2.runtime", {120.0, "criterion"}},
        {"ac3.runtime", {300.0, "criterion"}},
        {"ac4.runtime", {60.0, "criterion"}},
        {"ac4.offset", {0.5, "C = threshold -/+ offset"}},
        {"ac5.chi_square_alpha", {0.01, "criterion"}},
        {"ac6.ratio_low", {0.75, "pilot bracket"}},
        {"ac6.ratio_high", {1.25, "pilot bracket"}},
        {"ac6.runtime", {1200.0, "criterion"}},
        {"ac7.ratio_low", {0.6, "pilot bracket"}},
        {"ac7.ratio_high", {1.4, "pilot bracket"}},
        {"ac8.z", {4.0, "criterion"}},
        {"ac8.dispersion_low", {0.9, "criterion"}},
        {"ac8.dispersion_high", {1.1, "criterion"}},
        {"ac8.runtime", {300.0, "criterion"}},
        {"ac9.z", {4.0, "Monte Carlo error, 4 standard errors"}},
        {"ac10.ks_alpha", {0.01, "criterion"}},
        {"ac11.limit_rel", {0.25, "criterion"}},
        {"ac11.z", {4.0, "Monte Carlo error, 4 standard errors"}},
        {"ac12.exact", {1e-12, "criterion"}},
        {"ac12.series_target", {1e-13, "remainder target for choosing M"}},
        {"ac12.roundoff", {1e-15, "floating-point slack on the remainder bound"}},
        {"ac12.z", {4.0, "criterion"}},
        {"ac12.runtime", {120.0, "criterion"}},
    };
    return table;
}

// ---------------------------------------------------------------- suites

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t tag_hash(const std::string& tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) h = (h ^ c) * 0x100000001b3ULL;
    return mix64(h);
}

struct Context {
    const ExperimentConfig& config;
    JumpKernel kernel;
    HeatParams params;
    std::string suite;

    std::uint64_t seed_for(const std::string& tag) const { return config.seed ^ tag_hash(tag); }
    RngStream stream(const std::string& tag, std::uint64_t r) const { return RngStream{seed_for(tag), r}; }
    std::size_t replicas_or(std::size_t d) const { return config.replicas.value_or(d); }
    double tol(const std::string& name) const { return config.tolerance(name); }
};

class Recorder {
public:
    Recorder(const Context& ctx, std::string criterion) : ctx_(ctx), criterion_(std::move(criterion)) {}

    ResultRecord& add(const std::string& check, double statistic, double lower, double upper,
                      std::vector<double> values = {}, std::vector<std::pair<std::string, std::string>> params = {}) {
        ResultRecord r;
        r.suite = ctx_.suite;
        r.criterion = criterion_;
        r.check = check;
        r.parameters = std::move(params);
        if (!values.empty()) r.aggregate = aggregate_replicas(values);
        r.values = std::move(values);
        r.statistic = statistic;
        r.lower = lower;
        r.upper = upper;
        r.pass = statistic >= lower && statistic <= upper;
        r.wall_seconds = seconds_since(last_);
        last_ = Clock::now();
        records_.push_back(std::move(r));
        return records_.back();
    }
    ResultRecord& at_most(const std::string& check, double statistic, double upper, std::vector<double> values = {}) {
        return add(check, statistic, -std::numeric_limits<double>::infinity(), upper, std::move(values));
    }
    ResultRecord& at_least(const std::string& check, double statistic, double lower, std::vector<double> values = {}) {
        return add(check, statistic, lower, std::numeric_limits<double>::infinity(), std::move(values));
    }
    ResultRecord& runtime(const std::string& tol_name) {
        auto& r = at_most("runtime_seconds", seconds_since(start_), ctx_.tol(tol_name));
        r.timing = true;
        return r;
    }
    std::vector<ResultRecord> take() { return std::move(records_); }

private:
    const Context& ctx_;
    std::string criterion_;
    Clock::time_point start_ = Clock::now();
    Clock::time_point last_ = Clock::now();
    std::vector<ResultRecord> records_;
};

// Heat solutions are shared between suites in one process. Each request is
// rounded up to a fixed decade so a suite sees the same solution whether it
// runs alone or inside "acceptance".
std::shared_ptr<const RhoSolution> reference_solution(const Context& ctx, double t_needed) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const RhoSolution>> cache;
    double t_max = 100.0;
    while (t_max < t_needed) t_max *= 10.0;
    std::ostringstream key;
    key << ctx.kernel.describe() << '|' << format_number(ctx.params.gamma()) << '|'
        << format_number(ctx.params.alpha()) << '|' << format_number(t_max);
    std::lock_guard lock(mu);
    if (auto it = cache.find(key.str()); it != cache.end()) return it->second;
    SolveOptions opts;
    opts.t_max = t_max;
    opts.tol = 1e-8;
    for (double t = 10.0; t < t_max; t *= 10.0) opts.record_times.push_back(t);
    auto sol = std::make_shared<const RhoSolution>(solve_rho(ctx.params, opts));
    cache.emplace(key.str(), sol);
    return sol;
}

double integral_against_profile(const std::function<double(double)>& f) {
    // int f(y) tilde_rho(y) dy over R, f even
    boost::math::quadrature::exp_sinh<double> integrator;
    return 2.0 * integrator.integrate([&](double y) { return f(y) * tilde_rho(y); });
}

struct TestFunction {
    const char* name;
    double (*f)(double);
};
constexpr TestFunction kProfileFunctions[] = {
    {"f_one", [](double) { return 1.0; }},
    {"f_gauss", [](double y) { return std::exp(-2.0 * y * y); }},
    {"f_tail", [](double y) { return 1.0 - std::exp(-y * y / 2.0); }},
};

struct RwsbiEnsemble {
    double T = 0.0;
    double T_early = 0.0;
    std::vector<double> count_T;
    std::vector<double> count_early;
    std::vector<std::vector<double>> profile;  // per test function, per replica
    double seconds = 0.0;
};

const RwsbiEnsemble& rwsbi_ensemble(const Context& ctx, double T, std::size_t replicas) {
    static std::mutex mu;
    static std::map<std::string, RwsbiEnsemble> cache;
    std::ostringstream key;
    key << ctx.kernel.describe() << '|' << format_number(ctx.config.gamma) << '|' << format_number(T) << '|'
        << replicas << '|' << ctx.config.seed;
    std::lock_guard lock(mu);
    if (auto it = cache.find(key.str()); it != cache.end()) return it->second;
    const auto t0 = Clock::now();
    RwsbiEnsemble e;
    e.T = T;
    e.T_early = T / 10.0;
    struct One {
        double n_T, n_early;
        std::vector<double> prof;
    };
    const double sigma = ctx.kernel.sigma();
    const auto runs = run_replicas(replicas, [&](std::size_t r) {
        SimulationOptions opts;
        opts.snapshot_times = {e.T_early};
        const auto res = simulate_rwsbi(ctx.config.gamma, ctx.kernel, T, ctx.stream("rwsbi_ensemble", r), opts);
        One o;
        o.n_T = static_cast<double>(res.final_state().count_total());
        o.n_early = static_cast<double>(res.snapshot_at(e.T_early).count_total());
        for (const auto& tf : kProfileFunctions)
            o.prof.push_back(profile_estimator(res.final_state(), tf.f, T, sigma));
        return o;
    });
    e.profile.resize(std::size(kProfileFunctions));
    for (const auto& o : runs) {
        e.count_T.push_back(o.n_T);
        e.count_early.push_back(o.n_early);
        for (std::size_t j = 0; j < o.prof.size(); ++j) e.profile[j].push_back(o.prof[j]);
    }
    e.seconds = seconds_since(t0);
    return cache.emplace(key.str(), std::move(e)).first->second;
}

std::vector<double> scaled(std::vector<double> v, double by) {
    for (auto& x : v) x /= by;
    return v;
}

VacancySpec random_spec(int k, Rng& rng) {
    std::vector<double> atoms(std::size_t{1} << k, 0.0);
    for (std::size_t m = 1; m < atoms.size(); ++m) {
        if (rng.uniform() < 0.2) continue;
        atoms[m] = rng.uniform() * 0.3 / std::ldexp(1.0, std::popcount(static_cast<unsigned>(m)) - 1);
    }
    return VacancySpec::from_atoms(k, atoms);
}

// ---- individual suites

std::vector<ResultRecord> suite_smoke(const Context& ctx) {
    Recorder rec(ctx, "smoke");
    SolveOptions so;
    so.t_max = 50.0;
    so.record_times = {10.0};
    const auto sol = solve_rho(ctx.params, so);
    rec.at_most("mass_discrepancy", std::abs(max_mass_discrepancy(sol)), 1e-6);
    const double times[] = {1.0, 10.0, 50.0};
    rec.at_most("duhamel_residual", duhamel_residual(sol, times), 1e-5);

    const double T = ctx.config.t_max.value_or(50.0);
    const std::size_t reps = ctx.replicas_or(20);
    const auto violations = run_replicas(reps, [&](std::size_t r) {
        SimulationOptions o;
        o.record_log = true;
        const auto res = simulate_rwsbi(ctx.config.gamma, ctx.kernel, T, ctx.stream("smoke_rwsbi", r), o);
        return static_cast<double>(replay_log(*res.log, T).blocking_violations);
    });
    double total = 0.0;
    for (double v : violations) total += v;
    rec.at_most("blocking_violations", total, 0.0, violations);

    const VacancySpec spec(2, {0.0, 1.0, 1.0, 0.5});
    rec.at_most("correlation_k2", std::abs(correlation_exact(spec) - std::exp(-2.0) * std::expm1(0.5)), 1e-14);

    if (ctx.kernel.is_symmetric()) {
        const auto out = reflection_couple(3, ctx.kernel, ctx.stream("smoke_couple", 0));
        rec.add("coupling_resolved", std::isfinite(out.hit_time_origin) || out.success ? 1.0 : 0.0, 1.0, 1.0);
        const auto sol2 = reference_solution(ctx, 100.0);
        const auto lower = simulate_lower_coupling(0.5, ctx.config.gamma, ctx.kernel, 40, ctx.stream("smoke_lower", 0), sol2);
        rec.at_most("lower_inequality_violations", static_cast<double>(lower.inequality_violations), 0.0);
    }
    rec.runtime("smoke.runtime");
    return rec.take();
}

std::vector<ResultRecord> suite_ac1(const Context& ctx) {
    Recorder rec(ctx, "ac1");
    const double T = ctx.config.t_max.value_or(1000.0);
    SolveOptions so;
    so.t_max = T;
    so.tol = 1e-9;
    std::vector<double> times;
    for (double t : {1.0, 10.0, 100.0, 1000.0})
        if (t <= T) times.push_back(t);
    so.record_times = times;
    const auto sol = solve_rho(ctx.params, so);
    double mass = 0.0;
    for (double t : times) mass = std::max(mass, std::abs(total_mass(sol, t).discrepancy()));
    rec.at_most("mass_residual", mass, ctx.tol("ac1.mass_residual"));
    rec.at_most("duhamel_residual", duhamel_residual(sol, times), ctx.tol("ac1.duhamel_residual"));
    const auto vol = solve_rho0_volterra(ctx.params, T);
    double diff = 0.0;
    for (double t : times) diff = std::max(diff, std::abs(sol.rho0(t) - vol.at(t)));
    for (std::size_t i = 1; i <= 100; ++i) {
        const double t = T * static_cast<double>(i) / 100.0;
        diff = std::max(diff, std::abs(sol.rho0(t) - vol.at(t)));
    }
    rec.at_most("stepper_agreement", diff, ctx.tol("ac1.stepper_agreement"));
    rec.runtime("ac1.runtime");
    return rec.take();
}

std::vector<ResultRecord> suite_ac2(const Context& ctx) {
    Recorder rec(ctx, "ac2");
    double identity = 0.0;
    for (double y : {0.0, 0.5, 1.0, 2.0, 3.0})
        identity = std::max(identity, std::abs(tilde_rho_integral(y) - 0.5 * boost::math::erfc(y / std::numbers::sqrt2)));
    rec.at_most("profile_identity", identity, ctx.tol("ac2.profile_identity"));
    const auto sol = reference_solution(ctx, 1e4);
    std::vector<double> y;
    for (int i = -60; i <= 60; ++i) y.push_back(0.05 * i);
    std::vector<double> sup;
    for (double t : {1e2, 1e3, 1e4}) sup.push_back(rescaled_profile(*sol, t, y).sup_distance);
    rec.at_most("sup_distance_1e3_minus_1e2", sup[1] - sup[0], 0.0, sup);
    rec.at_most("sup_distance_1e4_minus_1e3", sup[2] - sup[1], 0.0, sup);
    rec.runtime("ac2.runtime");
    return rec.take();
}

std::vector<ResultRecord> suite_ac3(const Context& ctx) {
    Recorder rec(ctx, "ac3");
    const auto sol = reference_solution(ctx, 1e5);
    std::vector<double> d_rho, d_r;
    for (double t : {1e3, 1e4, 1e5}) {
        d_rho.push_back(std::abs(sol->rho0(t) - asymptotic_rho0(t, ctx.params)));
        d_r.push_back(std::abs(sol->r_integral(t) / asymptotic_R(t, ctx.params) - 1.0));
    }
    rec.at_most("rho0_gap_1e4_minus_1e3", d_rho[1] - d_rho[0], 0.0, d_rho);
    rec.at_most("rho0_gap_1e5_minus_1e4", d_rho[2] - d_rho[1], 0.0, d_rho);
    rec.at_most("R_ratio_gap_1e4_minus_1e3", d_r[1] - d_r[0], 0.0, d_r);
    rec.at_most("R_ratio_gap_1e5_minus_1e4", d_r[2] - d_r[1], 0.0, d_r);
    rec.runtime("ac3.runtime");
    return rec.take();
}

std::vector<ResultRecord> suite_ac4(const Context& ctx) {
    Recorder rec(ctx, "ac4");
    const HeatParams p(ctx.params.gamma(), 1.0, ctx.kernel);
    const SubSuperChecker checker(p, ctx.config.t_max.value_or(1e5));
    const double off = ctx.tol("ac4.offset");
    const auto sub = checker.scan(checker.threshold() - off, SolutionKind::Sub);
    const auto super = checker.scan(checker.threshold() + off, SolutionKind::Super);
    auto margins = [](const SubSuperVerdict& v) {
        std::vector<double> m;
        for (const auto& pt : v.points) m.push_back(v.kind == SolutionKind::Sub ? pt.rhs - pt.f : pt.f - pt.rhs);
        return m;
    };
    auto sub_m = margins(sub);
    auto super_m = margins(super);
    auto& r1 = rec.at_least("sub_min_margin", *std::min_element(sub_m.begin(), sub_m.end()), 0.0, sub_m);
    r1.parameters = {{"C", format_number(sub.C)}, {"K", format_number(sub.K)}};
    r1.pass = r1.pass && sub.all_hold();
    auto& r2 = rec.at_least("super_min_margin", *std::min_element(super_m.begin(), super_m.end()), 0.0, super_m);
    r2.parameters = {{"C", format_number(super.C)}, {"K", format_number(super.K)}, {"K_prime", format_number(super.K_prime)}};
    r2.pass = r2.pass && super.all_hold();
    rec.runtime("ac4.runtime");
    return rec.take();
}

std::vector<ResultRecord> suite_ac5(const Context& ctx) {
    Recorder rec(ctx, "ac5");
    const double T = ctx.config.t_max.value_or(100.0);
    const std::size_t reps = ctx.replicas_or(400);
    struct One {
        double violations;
        double inconsistent;
        std::uint64_t attempts;
    };
    const auto runs = run_replicas(reps, [&](std::size_t r) {
        SimulationOptions o;
        o.record_log = true;
        const auto res = simulate_rwsbi(ctx.config.gamma, ctx.kernel, T, ctx.stream("ac5", r), o);
        const auto rep = replay_log(*res.log, T);
        return One{static_cast<double>(rep.blocking_violations), rep.consistent ? 0.0 : 1.0, res.attempts};
    });
    std::vector<double> v;
    std::vector<std::uint64_t> attempts;
    double total = 0.0, bad = 0.0;
    for (const auto& o : runs) {
        v.push_back(o.violations);
        total += o.violations;
        bad += o.inconsistent;
        attempts.push_back(o.attempts);
    }
    rec.at_most("blocking_violations", total, 0.0, v);
    rec.at_most("inconsistent_replays", bad, 0.0);
    const auto chi = chi_square_poisson(attempts, ctx.config.gamma * T);
    std::vector<double> av(attempts.begin(), attempts.end());
    auto& r = rec.at_least("attempts_chi_square_p", chi.p_value, ctx.tol("ac5.chi_square_alpha"), av);
    r.parameters = {{"statistic", format_number(chi.statistic)}, {"dof", std::to_string(chi.dof)}};
    return rec.take();
}

std::vector<ResultRecord> suite_ac6(const Context& ctx) {
    Recorder rec(ctx, "ac6");
    const double T = ctx.config.t_max.value_or(1e4);
    const auto& e = rwsbi_ensemble(ctx, T, ctx.replicas_or(50));
    const auto sol = reference_solution(ctx, T);
    const auto ratio_T = scaled(e.count_T, sol->r_integral(T));
    const auto ratio_early = scaled(e.count_early, sol->r_integral(e.T_early));
    const double m_T = aggregate_replicas(ratio_T).mean;
    const double m_early = aggregate_replicas(ratio_early).mean;
    rec.add("mean_count_over_R", m_T, ctx.tol("ac6.ratio_low"), ctx.tol("ac6.ratio_high"), ratio_T);
    rec.add("trend_gap_T_minus_T_over_10", std::abs(m_T - 1.0) - std::abs(m_early - 1.0),
            -std::numeric_limits<double>::infinity(), 0.0, ratio_early);
    rec.at_most("ensemble_seconds", e.seconds, ctx.tol("ac6.runtime")).timing = true;
    return rec.take();
}

std::vector<ResultRecord> suite_ac7(const Context& ctx) {
    Recorder rec(ctx, "ac7");
    const double T = ctx.config.t_max.value_or(1e4);
    const auto& e = rwsbi_ensemble(ctx, T, ctx.replicas_or(50));
    for (std::size_t j = 0; j < std::size(kProfileFunctions); ++j) {
        const double target = integral_against_profile(kProfileFunctions[j].f);
        const auto ratios = scaled(e.profile[j], target);
        auto& r = rec.add(std::string(kProfileFunctions[j].name) + "_ratio", aggregate_replicas(ratios).mean,
                          ctx.tol("ac7.ratio_low"), ctx.tol("ac7.ratio_high"), ratios);
        r.parameters = {{"target", format_number(target)}};
    }
    return rec.take();
}

std::vector<ResultRecord> suite_ac8(const Context& ctx) {
    Recorder rec(ctx, "ac8");
    const double t = ctx.config.t_max.value_or(100.0);
    const std::size_t reps = ctx.replicas_or(10000);
    const auto sol = reference_solution(ctx, t);
    for (Sign sign : {Sign::Plus, Sign::Minus}) {
        const auto schedule =
            ImmigrationSchedule::tuned(sign, ctx.config.epsilon, ctx.config.gamma, Rho0Source::from_solution(sol));
        const std::string tag = sign == Sign::Plus ? "plus" : "minus";
        const auto counts = run_replicas(reps, [&](std::size_t r) {
            const auto res = simulate_poisson_system(schedule, ctx.kernel, t, ctx.stream("ac8_" + tag, r));
            return static_cast<double>(res.final_state().count_total());
        });
        const auto agg = aggregate_replicas(counts);
        const double expected = schedule.factor() * sol->r_integral(t);
        auto& r = rec.at_most(tag + "_mean_z", std::abs(agg.mean - expected) / agg.std_error, ctx.tol("ac8.z"), counts);
        r.parameters = {{"expected", format_number(expected)}};
        rec.add(tag + "_variance_over_mean", agg.variance / agg.mean, ctx.tol("ac8.dispersion_low"),
                ctx.tol("ac8.dispersion_high"));
    }
    rec.runtime("ac8.runtime");
    return rec.take();
}

std::vector<ResultRecord> suite_ac9(const Context& ctx) {
    Recorder rec(ctx, "ac9");
    const double eps = ctx.config.epsilon;
    const std::size_t reps = ctx.replicas_or(4000);
    const auto sol = reference_solution(ctx, 400.0);
    std::map<double, std::array<double, 2>> ratio;
    for (double t : {100.0, 400.0}) {
        const auto m = vacancy_moment_experiment(eps, t / 2.0, t, 2, reps, ctx.seed_for("ac9"), ctx.params, sol);
        double c4 = 0.0;
        for (double v : m.values) c4 += std::pow(v - m.mean, 4);
        c4 /= static_cast<double>(m.values.size());
        ratio[t] = {m.ratio, c4 / std::pow(m.mean, 4)};
        if (t == 400.0) {
            auto& r = rec.at_least("mean_minus_bound_z", (m.mean - m.intermediate_bound) / m.mean_stderr,
                                   -ctx.tol("ac9.z"), m.values);
            r.parameters = {{"bound", format_number(m.intermediate_bound)},
                            {"expected_mean", format_number(m.expected_mean)}};
        }
    }
    rec.at_most("k2_ratio_400_minus_100", ratio[400.0][0] - ratio[100.0][0], 0.0,
                {ratio[100.0][0], ratio[400.0][0]});
    rec.at_most("k4_ratio_400_minus_100", ratio[400.0][1] - ratio[100.0][1], 0.0,
                {ratio[100.0][1], ratio[400.0][1]});
    return rec.take();
}

std::vector<ResultRecord> suite_ac10(const Context& ctx) {
    Recorder rec(ctx, "ac10");
    const double T = ctx.config.t_max.value_or(1000.0);
    const std::size_t reps = ctx.replicas_or(1000);
    const auto sol = reference_solution(ctx, T);
    struct One {
        double violations = 0.0;
        double checks = 0.0;
        double eta_total = 0.0;
    };
    const auto coupled = run_replicas(reps, [&](std::size_t r) {
        One o;
        try {
            const auto res =
                simulate_upper_coupling(ctx.config.epsilon, ctx.config.gamma, ctx.kernel, T, ctx.stream("ac10_upper", r), sol);
            o.checks = static_cast<double>(res.domination_checks);
            o.eta_total = static_cast<double>(res.snapshots.back().eta.count_total());
        } catch (const DominationViolated&) {
            o.violations = 1.0;
            o.eta_total = std::numeric_limits<double>::quiet_NaN();
        }
        return o;
    });
    const auto direct = run_replicas(reps, [&](std::size_t r) {
        return static_cast<double>(
            simulate_rwsbi(ctx.config.gamma, ctx.kernel, T, ctx.stream("ac10_direct", r)).final_state().count_total());
    });
    double violations = 0.0, checks = 0.0;
    std::vector<double> eta;
    for (const auto& o : coupled) {
        violations += o.violations;
        checks += o.checks;
        if (std::isfinite(o.eta_total)) eta.push_back(o.eta_total);
    }
    auto& r = rec.at_most("domination_violations", violations, 0.0);
    r.parameters = {{"checks", format_number(checks)}};
    const auto ks = ks_two_sample(eta, direct, ctx.tol("ac10.ks_alpha"));
    auto& k = rec.at_most("eta_marginal_ks", ks.statistic, ks.critical, eta);
    k.parameters = {{"direct_mean", format_number(aggregate_replicas(direct).mean)}};
    return rec.take();
}

std::vector<ResultRecord> suite_ac11(const Context& ctx) {
    Recorder rec(ctx, "ac11");
    const std::size_t trials = ctx.replicas_or(100000);
    const auto ssrw_kernel = ssrw();
    const auto ok = run_replicas(trials, [&](std::size_t i) {
        const std::int64_t x0 = static_cast<std::int64_t>(i % 32 + 1) * ((i / 32) % 2 == 0 ? 1 : -1);
        return reflection_couple(x0, ssrw_kernel, ctx.stream("ac11_ssrw", i)).success ? 1.0 : 0.0;
    });
    rec.at_least("ssrw_success_fraction", aggregate_replicas(ok).mean, 1.0);

    const Jump two[] = {{-2, 0.25}, {-1, 0.25}, {1, 0.25}, {2, 0.25}};
    const auto wide = validate_kernel(two);
    std::vector<double> freq;
    const std::size_t gen_reps = std::max<std::size_t>(trials / 10, 2);
    for (std::int64_t x0 : {4, 16, 64}) {
        const auto s = run_replicas(gen_reps, [&](std::size_t i) {
            return reflection_couple(x0, wide, ctx.stream("ac11_wide_" + std::to_string(x0), i)).success ? 1.0 : 0.0;
        });
        freq.push_back(aggregate_replicas(s).mean);
    }
    rec.at_least("wide_success_16_minus_4", freq[1] - freq[0], std::numeric_limits<double>::min(), freq);
    rec.at_least("wide_success_64_minus_16", freq[2] - freq[1], std::numeric_limits<double>::min(), freq);

    const double eps = ctx.config.epsilon;
    const std::size_t n_max = ctx.config.n_max.value_or(2000);
    const auto grid = build_time_grid(eps, n_max);
    const auto sol = reference_solution(ctx, grid.t.back());
    const std::size_t lower_reps = 4;
    const auto lows = run_replicas(lower_reps, [&](std::size_t r) {
        return simulate_lower_coupling(eps, ctx.config.gamma, ctx.kernel, n_max, ctx.stream("ac11_lower", r), sol);
    });
    double ineq = 0.0, d_viol = 0.0, d_checks = 0.0;
    std::vector<double> m_tilde, t_tilde, m_minus_expected;
    for (const auto& l : lows) {
        ineq += static_cast<double>(l.inequality_violations);
        d_viol += static_cast<double>(l.property_d_violations);
        d_checks += static_cast<double>(l.property_d_checks);
        for (const auto& b : l.blocks) {
            if (2 * b.n <= n_max) continue;
            m_tilde.push_back(static_cast<double>(b.m_tilde));
            t_tilde.push_back(b.t_tilde_finite ? 1.0 : 0.0);
            m_minus_expected.push_back(static_cast<double>(b.m_tilde) - b.expected_m_tilde);
        }
    }
    rec.at_most("lower_inequality_violations", ineq, 0.0);
    auto& d = rec.at_most("lower_property_d_violations", d_viol, 0.0);
    d.parameters = {{"checks", format_number(d_checks)}};
    const double limit_m = 4.0 * eps * (1.0 - eps) * ctx.kernel.sigma() / std::sqrt(2.0 * std::numbers::pi);
    const double limit_p = -std::expm1(-limit_m);
    const double rel = ctx.tol("ac11.limit_rel");
    auto& a = rec.add("late_mean_m_tilde_over_limit", aggregate_replicas(m_tilde).mean / limit_m, 1.0 - rel, 1.0 + rel,
                      m_tilde);
    a.parameters = {{"limit", format_number(limit_m)}};
    auto& b = rec.add("late_p_tilde_finite_over_limit", aggregate_replicas(t_tilde).mean / limit_p, 1.0 - rel,
                      1.0 + rel, t_tilde);
    b.parameters = {{"limit", format_number(limit_p)}};
    const auto diff = aggregate_replicas(m_minus_expected);
    rec.at_most("late_m_tilde_vs_integrated_rate_z", std::abs(diff.mean) / diff.std_error, ctx.tol("ac11.z"),
                m_minus_expected);
    return rec.take();
}

std::vector<ResultRecord> suite_ac12(const Context& ctx) {
    Recorder rec(ctx, "ac12");
    Rng rng = ctx.stream("ac12_specs", 0).engine();
    double worst_exact = 0.0;
    for (int k = 2; k <= 6; ++k)
        for (int i = 0; i < 20; ++i) {
            const auto spec = random_spec(k, rng);
            const int M = series_order_for(spec, ctx.tol("ac12.series_target"));
            worst_exact = std::max(worst_exact, std::abs(correlation_series(spec, M).value - correlation_exact(spec)));
        }
    rec.at_most("series_vs_exact_max_abs", worst_exact, ctx.tol("ac12.exact"));

    double worst_ratio = 0.0;  // error / allowed
    std::size_t violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const int k = 2 + static_cast<int>(rng.below(5));
        const int M = static_cast<int>(rng.below(5));
        const auto spec = random_spec(k, rng);
        const auto s = correlation_series(spec, M);
        const double err = std::abs(correlation_exact(spec) - s.value);
        const double allowed = std::exp(-spec.singleton_sum()) * s.remainder_bound + ctx.tol("ac12.roundoff");
        worst_ratio = std::max(worst_ratio, err / allowed);
        if (err > allowed) ++violations;
    }
    auto& r = rec.at_most("remainder_bound_violations", static_cast<double>(violations), 0.0);
    r.parameters = {{"max_error_over_bound", format_number(worst_ratio)}};

    const std::size_t mc_reps = ctx.replicas_or(1000000);
    for (int k = 2; k <= 4; ++k) {
        const auto spec = random_spec(k, rng);
        const auto mc = correlation_montecarlo(spec, mc_reps, ctx.seed_for("ac12_mc_" + std::to_string(k)));
        auto& m = rec.at_most("mc_k" + std::to_string(k) + "_z", std::abs(mc.estimate - correlation_exact(spec)) / mc.std_error,
                              ctx.tol("ac12.z"));
        m.parameters = {{"estimate", format_number(mc.estimate)}, {"exact", format_number(correlation_exact(spec))}};
    }
    rec.runtime("ac12.runtime");
    return rec.take();
}

using SuiteFn = std::vector<ResultRecord> (*)(const Context&);

const std::vector<std::pair<std::string, SuiteFn>>& suite_table() {
    static const std::vector<std::pair<std::string, SuiteFn>> t{
        {"smoke", suite_smoke}, {"ac1", suite_ac1},   {"ac2", suite_ac2},   {"ac3", suite_ac3},
        {"ac4", suite_ac4},     {"ac5", suite_ac5},   {"ac6", suite_ac6},   {"ac7", suite_ac7},
        {"ac8", suite_ac8},     {"ac9", suite_ac9},   {"ac10", suite_ac10}, {"ac11", suite_ac11},
        {"ac12", suite_ac12},
    };
    return t;
}

}  // namespace

std::vector<std::string> available_suites() {
    std::vector<std::string> names;
    for (const auto& [n, f] : suite_table()) names.push_back(n);
    names.emplace_back("acceptance");
    names.emplace_back("all");
    return names;
}

std::vector<ResultRecord> run_suite(const ExperimentConfig& config) {
    config.validate();
    Context ctx{config, load_kernel(config.kernel), HeatParams(config.gamma, config.alpha, load_kernel(config.kernel)),
                config.suite};
    std::vector<std::string> parts;
    if (config.suite == "acceptance" || config.suite == "all") {
        if (config.suite == "all") parts.emplace_back("smoke");
        for (const auto& [n, f] : suite_table())
            if (n != "smoke") parts.push_back(n);
    } else {
        parts.push_back(config.suite);
    }
    std::vector<ResultRecord> out;
    for (const auto& name : parts) {
        const auto it = std::find_if(suite_table().begin(), suite_table().end(),
                                     [&](const auto& e) { return e.first == name; });
        try {
            auto recs = it->second(ctx);
            out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
        } catch (const std::exception& e) {
            std::throw_with_nested(SuiteError("suite " + name + ": " + e.what()));
        }
    }
    return out;
}

bool all_pass(const std::vector<ResultRecord>& records) {
    return std::all_of(records.begin(), records.end(), [](const ResultRecord& r) { return r.pass; });
}

void write_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<ResultRecord>& records) {
    for (const auto& [k, v] : config.entries()) out << "# " << k << '=' << v << '\n';
    out << "suite,criterion,check,statistic,lower,upper,pass,n,mean,variance,std_error,min,max\n";
    for (const auto& r : records) {
        out << r.suite << ',' << r.criterion << ',' << r.check << ',' << (r.timing ? "" : format_number(r.statistic)) << ','
            << format_number(r.lower) << ',' << format_number(r.upper) << ',' << (r.pass ? 1 : 0) << ',';
        if (r.aggregate) {
            const auto& a = *r.aggregate;
            out << a.n << ',' << format_number(a.mean) << ','
                << (a.variance_defined ? format_number(a.variance) : std::string("nan")) << ','
                << format_number(a.std_error) << ',' << format_number(a.min) << ',' << format_number(a.max);
        } else {
            out << "0,,,,,";
        }
        out << '\n';
    }
}

void write_replica_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<ResultRecord>& records) {
    for (const auto& [k, v] : config.entries()) out << "# " << k << '=' << v << '\n';
    out << "criterion,check,replica,value\n";
    for (const auto& r : records)
        for (std::size_t i = 0; i < r.values.size(); ++i)
            out << r.criterion << ',' << r.check << ',' << i << ',' << format_number(r.values[i]) << '\n';
}

void write_summary(std::ostream& out, const std::vector<ResultRecord>& records) {
    for (const auto& r : records) {
        out << (r.pass ? "PASS " : "FAIL ") << r.criterion << ' ' << r.check << " = " << format_number(r.statistic)
            << " in [" << format_number(r.lower) << ", " << format_number(r.upper) << "]";
        for (const auto& [k, v] : r.parameters) out << ' ' << k << '=' << v;
        char buf[32];
        std::snprintf(buf, sizeof buf, " (%.2fs)", r.wall_seconds);
        out << buf << '\n';
    }
}

void write_outputs(const ExperimentConfig& config, const std::vector<ResultRecord>& records) {
    std::filesystem::create_directories(config.output_dir);
    const auto base = std::filesystem::path(config.output_dir) / config.suite;
    std::ofstream csv(base.string() + ".csv");
    std::ofstream reps(base.string() + "_replicas.csv");
    std::ofstream summary(base.string() + "_summary.txt");
    if (!csv || !reps || !summary) throw ConfigError("cannot write outputs under '" + config.output_dir + "'");
    write_csv(csv, config, records);
    write_replica_csv(reps, config, records);
    write_summary(summary, records);
}

}  // namespace rwsbi
