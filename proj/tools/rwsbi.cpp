// rwsbi: command-line front end for the solver, simulators, couplings,
// correlation evaluators and acceptance suites.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rwsbi/correlations.hpp"
#include "rwsbi/couplings.hpp"
#include "rwsbi/errors.hpp"
#include "rwsbi/experiments.hpp"
#include "rwsbi/heat.hpp"
#include "rwsbi/particles.hpp"

using namespace rwsbi;

namespace {

// Writes to --out when given, otherwise stdout.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw ConfigError("cannot open '" + path + "' for writing");
        }
    }
    std::ostream& operator*() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::string num(double v) { return format_number(v); }

void print_error(const std::exception& e, int depth = 0) {
    std::cerr << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "error: " << e.what() << '\n';
    try {
        std::rethrow_if_nested(e);
    } catch (const std::exception& inner) {
        print_error(inner, depth + 1);
    }
}

std::shared_ptr<const RhoSolution> solve_for(const HeatParams& params, double t_max) {
    SolveOptions o;
    o.t_max = t_max;
    return std::make_shared<const RhoSolution>(solve_rho(params, o));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random walks with self-blocking immigration: solver, simulators, couplings, checks"};
    app.require_subcommand(1);

    std::string kernel_spec = "ssrw";
    double gamma = 1.0, alpha = 1.0, epsilon = 0.5;
    std::uint64_t seed = 1;
    std::string out;

    // solve-rho
    auto* solve = app.add_subcommand("solve-rho", "Solve the lattice heat equation");
    double s_tmax = 100.0, s_tol = 1e-8;
    std::optional<std::int64_t> s_radius;
    std::size_t s_stride = 1;
    std::vector<double> s_records;
    std::string s_profile_out;
    solve->add_option("--gamma", gamma, "immigration rate")->capture_default_str();
    solve->add_option("--alpha", alpha, "blocking strength")->capture_default_str();
    solve->add_option("--kernel", kernel_spec, "ssrw or kernel file")->capture_default_str();
    solve->add_option("--t-max", s_tmax)->capture_default_str();
    solve->add_option("--tol", s_tol)->capture_default_str();
    solve->add_option("--radius", s_radius, "lattice truncation |x| <= radius");
    solve->add_option("--stride", s_stride, "write every n-th step")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--record", s_records, "times at which to store full profiles");
    solve->add_option("--profile-out", s_profile_out, "CSV of x,t,rho at record times");
    solve->add_option("--out", out, "CSV of t,rho0,R_sum,R_integral (default stdout)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Simulate RWSBI or a tuned Poisson system");
    std::string sim_model;
    double sim_T = 100.0;
    std::size_t sim_reps = 1;
    std::string sim_sign = "plus";
    std::vector<double> sim_snaps;
    std::string sim_log;
    simulate->add_option("model", sim_model, "rwsbi or poisson")->required()->check(CLI::IsMember({"rwsbi", "poisson"}));
    simulate->add_option("--gamma", gamma)->capture_default_str();
    simulate->add_option("--kernel", kernel_spec)->capture_default_str();
    simulate->add_option("--t-max", sim_T)->capture_default_str();
    simulate->add_option("--replicas", sim_reps)->capture_default_str()->check(CLI::PositiveNumber);
    simulate->add_option("--seed", seed)->capture_default_str();
    simulate->add_option("--epsilon", epsilon, "poisson: tuning epsilon")->capture_default_str();
    simulate->add_option("--sign", sim_sign, "poisson: plus or minus")->check(CLI::IsMember({"plus", "minus"}));
    simulate->add_option("--snapshots", sim_snaps, "snapshot times (T is always included)");
    simulate->add_option("--log", sim_log, "rwsbi, replica 0: event log CSV");
    simulate->add_option("--out", out, "CSV of replica,t,count,origin_count");

    // couple
    auto* couple = app.add_subcommand("couple", "Coupling constructions");
    std::string c_kind;
    double c_T = 100.0;
    std::size_t c_nmax = 200, c_reps = 1;
    std::int64_t c_x0 = 5;
    couple->add_option("kind", c_kind, "upper, lower or two-walk")
        ->required()
        ->check(CLI::IsMember({"upper", "lower", "two-walk"}));
    couple->add_option("--epsilon", epsilon)->capture_default_str();
    couple->add_option("--gamma", gamma)->capture_default_str();
    couple->add_option("--kernel", kernel_spec)->capture_default_str();
    couple->add_option("--t-max", c_T, "upper: horizon")->capture_default_str();
    couple->add_option("--n-max", c_nmax, "lower: number of blocks")->capture_default_str();
    couple->add_option("--x0", c_x0, "two-walk: start of X")->capture_default_str();
    couple->add_option("--replicas", c_reps)->capture_default_str()->check(CLI::PositiveNumber);
    couple->add_option("--seed", seed)->capture_default_str();
    couple->add_option("--out", out);

    // correlate
    auto* correlate = app.add_subcommand("correlate", "Vacancy correlation of a Poisson process");
    std::string spec_path, mode = "exact";
    int M = 4;
    std::uint64_t corr_reps = 100000;
    correlate->add_option("--spec", spec_path, "lines `I:1,2 = value`")->required();
    correlate->add_option("--mode", mode)->check(CLI::IsMember({"exact", "series", "mc"}))->capture_default_str();
    correlate->add_option("--M", M, "series order")->capture_default_str();
    correlate->add_option("--replicas", corr_reps)->capture_default_str();
    correlate->add_option("--seed", seed)->capture_default_str();

    // verify
    auto* verify = app.add_subcommand("verify", "Run a named suite and write CSV + summary");
    std::string suite = "smoke", config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> v_seed;
    std::optional<std::size_t> v_reps;
    verify->add_option("--suite", suite, "smoke, ac1 .. ac12, acceptance, all")->capture_default_str();
    verify->add_option("--config", config_path, "key = value file");
    verify->add_option("--set", overrides, "key=value override (repeatable)");
    verify->add_option("--seed", v_seed);
    verify->add_option("--replicas", v_reps);
    verify->add_option("--out", out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            const HeatParams params(gamma, alpha, load_kernel(kernel_spec));
            SolveOptions o;
            o.t_max = s_tmax;
            o.tol = s_tol;
            o.radius = s_radius;
            o.record_times = s_records;
            const auto sol = solve_rho(params, o);
            Output os(out);
            *os << "# kernel=" << params.kernel().describe() << "\n# gamma=" << num(gamma) << "\n# alpha=" << num(alpha)
                << "\n# radius=" << sol.radius() << "\n# tol=" << num(sol.tol()) << "\n# dt_policy=" << sol.dt_policy()
                << "\n# boundary_leak=" << num(sol.boundary_leak()) << '\n';
            *os << "t,rho0,R_sum,R_integral\n";
            const auto t = sol.times();
            for (std::size_t i = 0; i < t.size(); ++i)
                if (i % s_stride == 0 || i + 1 == t.size())
                    *os << num(t[i]) << ',' << num(sol.rho0_series()[i]) << ',' << num(sol.r_sum_series()[i]) << ','
                        << num(sol.r_integral_series()[i]) << '\n';
            if (!s_profile_out.empty()) {
                Output ps(s_profile_out);
                *ps << "t,x,rho\n";
                for (double rt : sol.record_times()) {
                    const auto prof = sol.profile(rt);
                    for (std::size_t i = 0; i < prof.size(); ++i)
                        *ps << num(rt) << ',' << static_cast<std::int64_t>(i) - sol.radius() << ',' << num(prof[i])
                            << '\n';
                }
            }
            return 0;
        }
        if (simulate->parsed()) {
            const auto kernel = load_kernel(kernel_spec);
            SimulationOptions so;
            so.snapshot_times = sim_snaps;
            std::optional<ImmigrationSchedule> schedule;
            if (sim_model == "poisson") {
                const HeatParams params(gamma, 1.0, kernel);
                schedule = ImmigrationSchedule::tuned(sim_sign == "plus" ? Sign::Plus : Sign::Minus, epsilon, gamma,
                                                      Rho0Source::from_solution(solve_for(params, sim_T)));
            }
            Output os(out);
            *os << "# model=" << sim_model << "\n# kernel=" << kernel.describe() << "\n# gamma=" << num(gamma)
                << "\n# seed=" << seed << '\n';
            *os << "replica,t,count,origin_count,attempts,successes\n";
            for (std::size_t r = 0; r < sim_reps; ++r) {
                so.record_log = sim_model == "rwsbi" && r == 0 && !sim_log.empty();
                const auto res = schedule ? simulate_poisson_system(*schedule, kernel, sim_T, RngStream{seed, r}, so)
                                          : simulate_rwsbi(gamma, kernel, sim_T, RngStream{seed, r}, so);
                for (const auto& snap : res.snapshots)
                    *os << r << ',' << num(snap.time()) << ',' << snap.count_total() << ',' << snap.occupancy(0) << ','
                        << res.attempts << ',' << res.successes << '\n';
                if (res.log) {
                    Output ls(sim_log);
                    *ls << "time,kind,particle,from,to\n";
                    for (const auto& e : res.log->events) {
                        const char* kind = e.kind == EventKind::Jump                 ? "jump"
                                           : e.kind == EventKind::ImmigrationSuccess ? "immigration_success"
                                                                                     : "immigration_blocked";
                        *ls << num(e.time) << ',' << kind << ',' << e.particle << ',' << e.from << ',' << e.to << '\n';
                    }
                }
            }
            return 0;
        }
        if (couple->parsed()) {
            const auto kernel = load_kernel(kernel_spec);
            Output os(out);
            if (c_kind == "two-walk") {
                *os << "replica,x0,success,coupling_time,hit_time_origin,jumps\n";
                for (std::size_t r = 0; r < c_reps; ++r) {
                    const auto o = reflection_couple(c_x0, kernel, RngStream{seed, r});
                    *os << r << ',' << c_x0 << ',' << (o.success ? 1 : 0) << ',' << num(o.coupling_time) << ','
                        << num(o.hit_time_origin) << ',' << o.jumps << '\n';
                }
            } else if (c_kind == "upper") {
                const auto rho = solve_for(HeatParams(gamma, 1.0, kernel), c_T);
                *os << "replica,t,eta,eta_tilde,eta_hat,domination_checks\n";
                for (std::size_t r = 0; r < c_reps; ++r) {
                    const auto res = simulate_upper_coupling(epsilon, gamma, kernel, c_T, RngStream{seed, r}, rho);
                    for (const auto& s : res.snapshots)
                        *os << r << ',' << num(s.t) << ',' << s.eta.count_total() << ',' << s.eta_tilde.count_total()
                            << ',' << s.eta_hat.count_total() << ',' << res.domination_checks << '\n';
                }
            } else {
                const auto grid = build_time_grid(epsilon, c_nmax);
                const auto rho = solve_for(HeatParams(gamma, 1.0, kernel), grid.t.back());
                const auto res = simulate_lower_coupling(epsilon, gamma, kernel, c_nmax, RngStream{seed, 0}, rho);
                *os << "n,t_hat_finite,t_tilde_finite,e_n,m_tilde_n,cum_e\n";
                for (const auto& b : res.blocks)
                    *os << b.n << ',' << b.t_hat_finite << ',' << b.t_tilde_finite << ',' << b.e_n << ',' << b.m_tilde
                        << ',' << b.cum_e << '\n';
            }
            return 0;
        }
        if (correlate->parsed()) {
            const auto spec = load_vacancy_spec(spec_path);
            if (mode == "exact") {
                std::cout << "value\n" << num(correlation_exact(spec)) << '\n';
            } else if (mode == "series") {
                const auto s = correlation_series(spec, M);
                std::cout << "value,remainder_bound\n" << num(s.value) << ',' << num(s.remainder_bound) << '\n';
            } else {
                const auto mc = correlation_montecarlo(spec, corr_reps, seed);
                std::cout << "estimate,std_error\n" << num(mc.estimate) << ',' << num(mc.std_error) << '\n';
            }
            return 0;
        }
        if (verify->parsed()) {
            ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(config_path);
            cfg.suite = suite;
            for (const auto& kv : overrides) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
                cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
            }
            if (v_seed) cfg.seed = *v_seed;
            if (v_reps) cfg.replicas = *v_reps;
            cfg.apply_environment();
            if (!out.empty()) cfg.output_dir = out;
            const auto records = run_suite(cfg);
            write_outputs(cfg, records);
            write_summary(std::cout, records);
            const bool ok = all_pass(records);
            std::cout << (ok ? "suite passed" : "suite failed") << '\n';
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        print_error(e);
        return 2;
    }
    return 0;
}
