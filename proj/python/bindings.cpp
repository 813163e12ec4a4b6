#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <memory>
#include <span>
#include <sstream>

#include "rwsbi/correlations.hpp"
#include "rwsbi/couplings.hpp"
#include "rwsbi/errors.hpp"
#include "rwsbi/experiments.hpp"
#include "rwsbi/heat.hpp"
#include "rwsbi/kernel.hpp"
#include "rwsbi/particles.hpp"

namespace py = pybind11;
using namespace rwsbi;

namespace {

py::array_t<double> to_array(std::span<const double> s) {
    py::array_t<double> out(static_cast<py::ssize_t>(s.size()));
    std::copy(s.begin(), s.end(), out.mutable_data());
    return out;
}

JumpKernel kernel_from(const py::object& obj) {
    if (py::isinstance<JumpKernel>(obj)) return obj.cast<JumpKernel>();
    if (py::isinstance<py::str>(obj)) return load_kernel(obj.cast<std::string>());
    std::vector<Jump> jumps;
    for (const auto& item : obj) {
        const auto pair = item.cast<std::pair<std::int64_t, double>>();
        jumps.push_back({pair.first, pair.second});
    }
    return validate_kernel(jumps);
}

py::dict record_dict(const ResultRecord& r) {
    py::dict d;
    d["suite"] = r.suite;
    d["criterion"] = r.criterion;
    d["check"] = r.check;
    d["statistic"] = r.statistic;
    d["lower"] = r.lower;
    d["upper"] = r.upper;
    d["passed"] = r.pass;
    d["values"] = r.values;
    py::dict params;
    for (const auto& [k, v] : r.parameters) params[py::str(k)] = v;
    d["parameters"] = params;
    return d;
}

}  // namespace

PYBIND11_MODULE(_rwsbi, m) {
    m.doc() = "Random walks with self-blocking immigration: solver, simulators, couplings, correlations.";

    // translators run newest first, so the base is registered before the subclasses
    auto& base = py::register_exception<Error>(m, "RwsbiError", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InvalidSpec>(m, "InvalidSpec", base.ptr());
    py::register_exception<UnrealizableSpec>(m, "UnrealizableSpec", base.ptr());
    py::register_exception<KTooLarge>(m, "KTooLarge", base.ptr());
    py::register_exception<KernelNotSymmetric>(m, "KernelNotSymmetric", base.ptr());

    py::class_<JumpKernel>(m, "JumpKernel")
        .def_property_readonly("sigma2", &JumpKernel::sigma2)
        .def_property_readonly("sigma", &JumpKernel::sigma)
        .def_property_readonly("max_jump", &JumpKernel::max_jump)
        .def_property_readonly("symmetric", &JumpKernel::is_symmetric)
        .def("probability", &JumpKernel::probability)
        .def("jumps", [](const JumpKernel& k) {
            std::vector<std::pair<std::int64_t, double>> out;
            for (const auto& j : k.jumps()) out.emplace_back(j.displacement, j.probability);
            return out;
        })
        .def("__repr__", &JumpKernel::describe);
    m.def("ssrw", &ssrw);
    m.def("kernel", &kernel_from, py::arg("spec"),
          "Kernel from a list of (offset, probability), a file path or the name 'ssrw'.");

    py::class_<RhoSolution, std::shared_ptr<RhoSolution>>(m, "RhoSolution")
        .def_property_readonly("t_max", &RhoSolution::t_max)
        .def_property_readonly("radius", &RhoSolution::radius)
        .def_property_readonly("times", [](const RhoSolution& s) { return to_array(s.times()); })
        .def_property_readonly("rho0_series", [](const RhoSolution& s) { return to_array(s.rho0_series()); })
        .def_property_readonly("record_times", [](const RhoSolution& s) { return to_array(s.record_times()); })
        .def("rho0", [](const RhoSolution& s, py::array_t<double, py::array::c_style | py::array::forcecast> t) {
            py::array_t<double> out(t.request().shape);
            const auto* in = t.data();
            auto* o = out.mutable_data();
            for (py::ssize_t i = 0; i < t.size(); ++i) o[i] = s.rho0(in[i]);
            return out;
        })
        .def("r_integral", &RhoSolution::r_integral)
        .def("profile", [](const RhoSolution& s, double t) { return to_array(s.profile(t)); })
        .def("mass_discrepancy", [](const RhoSolution& s) { return max_mass_discrepancy(s); });

    m.def(
        "solve_rho",
        [](double gamma, double alpha, const py::object& kernel, double t_max, double tol,
           std::optional<std::int64_t> radius, std::vector<double> record_times) {
            SolveOptions o;
            o.t_max = t_max;
            o.tol = tol;
            o.radius = radius;
            o.record_times = std::move(record_times);
            HeatParams params(gamma, alpha, kernel_from(kernel));
            py::gil_scoped_release release;
            return std::make_shared<RhoSolution>(solve_rho(params, o));
        },
        py::arg("gamma"), py::arg("alpha"), py::arg("kernel") = "ssrw", py::arg("t_max") = 100.0,
        py::arg("tol") = 1e-8, py::arg("radius") = py::none(), py::arg("record_times") = std::vector<double>{});
    m.def(
        "asymptotic_rho0",
        [](double t, double gamma, double alpha, const py::object& k) {
            return asymptotic_rho0(t, HeatParams(gamma, alpha, kernel_from(k)));
        },
        py::arg("t"), py::arg("gamma"), py::arg("alpha"), py::arg("kernel") = "ssrw");
    m.def(
        "asymptotic_R",
        [](double t, double gamma, double alpha, const py::object& k) {
            return asymptotic_R(t, HeatParams(gamma, alpha, kernel_from(k)));
        },
        py::arg("t"), py::arg("gamma"), py::arg("alpha"), py::arg("kernel") = "ssrw");
    m.def("tilde_rho", py::vectorize(&tilde_rho));

    m.def(
        "simulate_rwsbi",
        [](double gamma, const py::object& k, double T, std::uint64_t seed, std::uint64_t stream) {
            const auto kern = kernel_from(k);
            SimulationResult r = [&] {
                py::gil_scoped_release release;
                return simulate_rwsbi(gamma, kern, T, RngStream{seed, stream});
            }();
            py::dict d;
            const auto pos = r.final_state().positions();
            py::array_t<std::int64_t> positions(static_cast<py::ssize_t>(pos.size()));
            std::copy(pos.begin(), pos.end(), positions.mutable_data());
            d["positions"] = positions;
            d["attempts"] = r.attempts;
            d["successes"] = r.successes;
            d["blocked"] = r.blocked;
            d["jumps"] = r.jumps;
            d["vacant_time"] = r.vacancy.vacant_time(0.0, T);
            return d;
        },
        py::arg("gamma"), py::arg("kernel"), py::arg("T"), py::arg("seed") = 0, py::arg("stream") = 0);

    m.def(
        "reflection_couple",
        [](std::int64_t x0, const py::object& k, std::uint64_t seed, std::uint64_t stream, bool record_paths) {
            CouplingOptions o;
            o.record_paths = record_paths;
            const auto out = reflection_couple(x0, kernel_from(k), RngStream{seed, stream}, o);
            py::dict d;
            d["success"] = out.success;
            d["coupling_time"] = out.coupling_time;
            d["hit_time_origin"] = out.hit_time_origin;
            if (out.paths) {
                std::vector<std::tuple<double, std::int64_t, std::int64_t>> p;
                for (const auto& q : *out.paths) p.emplace_back(q.t, q.x, q.y);
                d["paths"] = p;
            }
            return d;
        },
        py::arg("x0"), py::arg("kernel"), py::arg("seed") = 0, py::arg("stream") = 0,
        py::arg("record_paths") = false);
    m.def(
        "coupling_success_prob",
        [](std::int64_t x0, const py::object& k, std::size_t replicas, std::uint64_t seed) {
            const auto kern = kernel_from(k);
            SuccessEstimate e = [&] {
                py::gil_scoped_release release;
                return coupling_success_prob(x0, kern, replicas, seed);
            }();
            return py::make_tuple(e.estimate, e.std_error);
        },
        py::arg("x0"), py::arg("kernel"), py::arg("replicas"), py::arg("seed") = 0);
    m.def(
        "time_grid",
        [](double eps, std::size_t n_max) {
            const auto g = build_time_grid(eps, n_max);
            return to_array(g.t);
        },
        py::arg("epsilon"), py::arg("n_max"));

    py::class_<VacancySpec>(m, "VacancySpec")
        .def(py::init<int, std::vector<double>>(), py::arg("k"), py::arg("nu"))
        .def_static("from_atoms", &VacancySpec::from_atoms)
        .def_static("parse", [](const std::string& text) {
            std::istringstream in(text);
            return parse_vacancy_spec(in);
        })
        .def_property_readonly("k", &VacancySpec::k)
        .def("nu", &VacancySpec::nu)
        .def_property_readonly("atoms", &VacancySpec::atoms);
    m.def("correlation_exact", &correlation_exact);
    m.def(
        "correlation_series",
        [](const VacancySpec& s, int M) {
            const auto r = correlation_series(s, M);
            return py::make_tuple(r.value, r.remainder_bound);
        },
        py::arg("spec"), py::arg("M"));
    m.def(
        "correlation_montecarlo",
        [](const VacancySpec& s, std::uint64_t replicas, std::uint64_t seed) {
            const auto r = correlation_montecarlo(s, replicas, seed);
            return py::make_tuple(r.estimate, r.std_error);
        },
        py::arg("spec"), py::arg("replicas"), py::arg("seed") = 0);

    m.def("available_suites", &available_suites);
    m.def(
        "run_suite",
        [](const std::string& suite, const std::map<std::string, std::string>& settings) {
            ExperimentConfig c;
            c.suite = suite;
            for (const auto& [k, v] : settings) c.set(k, v);
            c.validate();
            std::vector<ResultRecord> recs;
            {
                py::gil_scoped_release release;
                recs = run_suite(c);
            }
            py::list out;
            for (const auto& r : recs) out.append(record_dict(r));
            return out;
        },
        py::arg("suite"), py::arg("settings") = std::map<std::string, std::string>{});
}
