#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evsched/exactdp.hpp"
#include "evsched/interchange.hpp"
#include "evsched/montecarlo.hpp"
#include "evsched/parallel.hpp"
#include "evsched/scenario_io.hpp"

#include <sstream>

namespace py = pybind11;
using namespace evsched;

// Structured results cross the boundary as JSON text; the Python package
// turns them into dicts.

namespace {

int threads_or_default(int threads) { return threads > 0 ? threads : default_thread_count(); }

std::string simulate(const ScenarioModel& model, const std::string& policy, int stages, int warmup,
                     std::size_t trajectories, std::uint64_t seed, int threads) {
    auto p = make_policy(policy, model);
    TrajectoryOptions opt;
    opt.stages = stages;
    opt.warmup = warmup;
    const auto est = monte_carlo(model, *p, opt, trajectories, seed, threads_or_default(threads));
    nlohmann::json out{{"policy", policy},        {"trajectories", est.trajectories}, {"seed", est.seed},
                       {"mean", est.warm.mean},   {"stderr", est.warm.stderr_},       {"raw_mean", est.raw.mean},
                       {"raw_stderr", est.raw.stderr_}, {"samples", est.samples}};
    return out.dump();
}

std::string compare(const ScenarioModel& model, const std::vector<std::string>& policies, const std::vector<int>& rates,
                    int stages, int warmup, std::size_t trajectories, std::uint64_t seed, int threads) {
    ExperimentOptions opt;
    opt.policies = policies;
    opt.rates = rates;
    opt.stages = stages;
    opt.warmup = warmup;
    opt.trajectories = trajectories;
    opt.seed = seed;
    opt.threads = threads_or_default(threads);
    std::ostringstream os;
    compare_policies(model, opt).write_csv(os);
    return os.str();
}

std::string certify(const ScenarioModel& model, const std::string& policy, std::size_t cases, std::uint64_t seed,
                    int threads) {
    auto p = make_policy(policy, model);
    CertifyOptions opt;
    opt.cases = cases;
    opt.seed = seed;
    opt.threads = threads_or_default(threads);
    return report_to_json(certify_dominance(model, *p, opt)).dump();
}

std::string certify_pair(const std::vector<std::string>& penalty, const std::string& rule, std::size_t instances,
                         std::uint64_t seed, int max_stay, int max_request) {
    std::vector<Rational> values;
    for (const auto& v : penalty) values.push_back(Rational::parse(v));
    const auto q = PenaltyFunction::from_table_unchecked(std::move(values));
    return report_to_json(certify_two_vehicle(q, parse_priority_rule(rule), instances, seed, max_stay, max_request))
        .dump();
}

std::string solve_exact(const ScenarioModel& model, double tol, bool exact, std::size_t max_states) {
    EnumerationOptions eo;
    eo.max_states = max_states;
    const auto mdp = enumerate(model, eo);
    RviOptions ro;
    ro.tol = tol;
    DPSolution sol = relative_value_iteration(mdp, ro);
    if (exact) sol = exact_policy_iteration(mdp, sol);
    const auto check = verify_constant_gain(mdp, sol, tol);
    const auto proj = lllp_projection(mdp, sol, tol);
    nlohmann::json out;
    out["state_count"] = mdp.state_count();
    out["solution"] = solution_to_json(mdp, sol);
    out["constant_gain"] = {{"passed", check.passed()},
                            {"residual", check.residual},
                            {"gain_spread", check.gain_spread},
                            {"recurrent_classes", check.recurrent_classes},
                            {"findings", check.findings}};
    out["projection"] = {{"violations_before", proj.violations_before},
                         {"violations_after", proj.violations_after},
                         {"swaps", proj.swaps},
                         {"compliant_violations", count_violations(mdp, proj.policy)}};
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "evsched native core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
    py::register_exception<StateSpaceTooLarge>(m, "StateSpaceTooLarge", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    py::class_<ScenarioModel>(m, "Scenario")
        .def_readonly("name", &ScenarioModel::name)
        .def_property_readonly("chargers", [](const ScenarioModel& s) { return s.dims.chargers; })
        .def_property_readonly("max_stay", [](const ScenarioModel& s) { return s.dims.max_stay; })
        .def_property_readonly("max_request", [](const ScenarioModel& s) { return s.dims.max_request; })
        .def("to_json", [](const ScenarioModel& s) { return scenario_to_json(s).dump(); });

    m.def("load_scenario", &load_scenario, py::arg("path"));
    m.def("scenario_from_json", &scenario_from_string, py::arg("text"));
    m.def(
        "benchmark",
        [](int rate, const std::string& penalty) { return scenario_sec5(rate, parse_penalty_kind(penalty)); },
        py::arg("rate"), py::arg("penalty") = "linear");

    m.def(
        "laxity", [](int lambda, int gamma, int max_stay) { return laxity({lambda, gamma}, max_stay); },
        py::arg("lam"), py::arg("gamma"), py::arg("max_stay"));
    m.def(
        "compare_priority",
        [](std::pair<int, int> vi, std::pair<int, int> vj, int max_stay) {
            return to_string(compare_priority({vi.first, vi.second}, {vj.first, vj.second}, max_stay));
        },
        py::arg("vi"), py::arg("vj"), py::arg("max_stay"));
    m.def(
        "decide",
        [](const ScenarioModel& model, const std::string& policy, const std::vector<std::pair<int, int>>& vehicles,
           int grid) {
            SystemState x;
            for (const auto& [l, g] : vehicles) x.vehicles.push_back({l, g});
            x.grid = grid;
            validate(x, model.dims, model.grid.state_count(), model.demand.state_count());
            const auto a = make_policy(policy, model)->decide(x);
            return std::vector<int>(a.bits().begin(), a.bits().end());
        },
        py::arg("scenario"), py::arg("policy"), py::arg("vehicles"), py::arg("grid") = 0);

    m.def("simulate", &simulate, py::arg("scenario"), py::arg("policy"), py::arg("stages") = 200, py::arg("warmup") = 20,
          py::arg("trajectories") = 1000, py::arg("seed") = 7, py::arg("threads") = 0,
          py::call_guard<py::gil_scoped_release>());
    m.def("compare", &compare, py::arg("scenario"), py::arg("policies"), py::arg("rates"), py::arg("stages") = 200,
          py::arg("warmup") = 20, py::arg("trajectories") = 1000, py::arg("seed") = 7, py::arg("threads") = 0,
          py::call_guard<py::gil_scoped_release>());
    m.def("certify", &certify, py::arg("scenario"), py::arg("policy"), py::arg("cases") = 1000, py::arg("seed") = 1,
          py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());
    m.def("certify_two_vehicle", &certify_pair, py::arg("penalty"), py::arg("policy"), py::arg("instances") = 10000,
          py::arg("seed") = 1, py::arg("max_stay") = 3, py::arg("max_request") = 3,
          py::call_guard<py::gil_scoped_release>());
    m.def("solve_exact", &solve_exact, py::arg("scenario"), py::arg("tol") = 1e-10, py::arg("exact") = false,
          py::arg("max_states") = 2'000'000, py::call_guard<py::gil_scoped_release>());
}
