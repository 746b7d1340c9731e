// evsched command-line tool: simulate, verify-dominance, solve-exact.
//
// Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

#include "evsched/exactdp.hpp"
#include "evsched/interchange.hpp"
#include "evsched/montecarlo.hpp"
#include "evsched/parallel.hpp"
#include "evsched/scenario_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;
using namespace evsched;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

int parse_int(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(text, &used);
    } catch (const std::exception&) {
        throw UsageError("bad " + what + " '" + text + "'");
    }
    if (used != text.size()) throw UsageError("bad " + what + " '" + text + "'");
    return value;
}

/// "lo:hi" (inclusive) or a comma list.
std::vector<int> parse_rates(const std::string& text) {
    std::vector<int> rates;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        const int lo = parse_int(text.substr(0, colon), "rate");
        const int hi = parse_int(text.substr(colon + 1), "rate");
        if (hi < lo) throw UsageError("empty rate range '" + text + "'");
        for (int r = lo; r <= hi; ++r) rates.push_back(r);
    } else {
        for (const auto& item : split(text, ',')) rates.push_back(parse_int(item, "rate"));
    }
    if (rates.empty()) throw UsageError("no arrival rates given");
    for (int r : rates)
        if (r < 0) throw UsageError("arrival rates must be >= 0");
    return rates;
}

/// Scenario file with an optional penalty override applied before parsing,
/// so derived quantities such as the overload cost follow the new penalty.
ScenarioModel load_with_penalty(const std::string& path, const std::string& penalty) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in '" + path + "': " + e.what());
    }
    if (!penalty.empty()) {
        if (penalty != "linear" && penalty != "quadratic")
            throw UsageError("unknown penalty '" + penalty + "' (expected linear|quadratic)");
        doc["penalty"] = penalty;
    }
    return scenario_from_json(doc);
}

void check_policy_names(const std::vector<std::string>& names) {
    for (const auto& name : names) {
        try {
            (void)parse_priority_rule(name);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
}

void log_config(const std::string& command, const json& config) {
    std::cerr << "[evsched] " << command << " config " << config.dump() << "\n";
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

struct SimulateArgs {
    std::string scenario;
    std::string policies = "edf,llsp,lllp";
    std::string penalty;
    std::string rates;
    std::uint64_t seed = 7;
    std::string out;
    int stages = 200;
    int warmup = 20;
    std::size_t trajectories = 10000;
    int threads = 0;
};

int cmd_simulate(const SimulateArgs& args) {
    const ScenarioModel model = load_with_penalty(args.scenario, args.penalty);
    ExperimentOptions opt;
    opt.policies = split(args.policies, ',');
    if (opt.policies.empty()) throw UsageError("no policies given");
    check_policy_names(opt.policies);
    if (!args.rates.empty()) {
        opt.rates = parse_rates(args.rates);
    } else {
        // The scenario's own constant arrival count.
        int rate = -1;
        for (int d = 0; d < model.demand.state_count(); ++d) {
            const auto& count = model.demand.law(d).count;
            int point = -1;
            for (std::size_t k = 0; k < count.size(); ++k)
                if (count.probability(k) == Rational{1}) point = static_cast<int>(k);
            if (point < 0 || (d > 0 && point != rate)) throw UsageError("scenario has no constant arrival count; pass --rates");
            rate = point;
        }
        opt.rates = {rate};
    }
    if (args.stages < 1) throw UsageError("--T must be >= 1");
    if (args.warmup < 0 || args.warmup >= args.stages) throw UsageError("--warmup must be in [0, T)");
    if (args.trajectories < 1) throw UsageError("--n-traj must be >= 1");
    opt.stages = args.stages;
    opt.warmup = args.warmup;
    opt.trajectories = args.trajectories;
    opt.seed = args.seed;
    opt.threads = args.threads > 0 ? args.threads : default_thread_count();

    log_config("simulate", {{"scenario", args.scenario},
                            {"scenario_name", model.name},
                            {"policies", opt.policies},
                            {"penalty", model.penalty.name()},
                            {"rates", opt.rates},
                            {"T", opt.stages},
                            {"warmup", opt.warmup},
                            {"n_traj", opt.trajectories},
                            {"seed", opt.seed},
                            {"threads", opt.threads},
                            {"out", args.out}});
    const ComparisonTable table = compare_policies(model, opt);
    std::ostringstream csv;
    table.write_csv(csv);
    write_output(args.out, csv.str());
    return kOk;
}

struct DominanceArgs {
    std::string scenario;
    std::string policies = "edf,llsp";
    std::string penalty;
    int rate = -1;
    std::size_t cases = 1000;
    std::uint64_t seed = 1;
    int search_stages = 400;
    int burn_in = 40;
    int threads = 0;
    std::string out;
    std::string bundle;
    bool two_vehicle = false;
};

int cmd_verify_dominance(const DominanceArgs& args) {
    if (args.cases == 0) throw UsageError("--cases must be >= 1");
    ScenarioModel model = load_with_penalty(args.scenario, args.penalty);
    if (args.rate >= 0) model = with_arrival_rate(std::move(model), args.rate);
    const auto names = split(args.policies, ',');
    if (names.empty()) throw UsageError("no policies given");
    check_policy_names(names);
    CertifyOptions opt;
    opt.cases = args.cases;
    opt.seed = args.seed;
    opt.search_stages = args.search_stages;
    opt.burn_in = args.burn_in;
    opt.threads = args.threads > 0 ? args.threads : default_thread_count();
    log_config("verify-dominance", {{"scenario", args.scenario},
                                    {"scenario_name", model.name},
                                    {"policies", names},
                                    {"penalty", model.penalty.name()},
                                    {"rate", args.rate},
                                    {"cases", opt.cases},
                                    {"seed", opt.seed},
                                    {"search_stages", opt.search_stages},
                                    {"burn_in", opt.burn_in},
                                    {"two_vehicle", args.two_vehicle},
                                    {"threads", opt.threads}});
    json reports = json::array();
    std::vector<ReproductionBundle> failures;
    std::size_t counterexamples = 0;
    bool all_passed = true;
    for (const auto& name : names) {
        DominanceReport report;
        if (args.two_vehicle) {
            report = certify_two_vehicle(model.penalty, parse_priority_rule(name), opt.cases, opt.seed, model.dims.max_stay,
                                         model.dims.max_request);
        } else {
            const auto policy = make_policy(name, model);
            report = certify_dominance(model, *policy, opt);
        }
        counterexamples += report.counterexamples;
        all_passed = all_passed && report.passed();
        std::cerr << "[evsched] " << name << ": cases " << report.cases << ", strict " << report.strict << ", equal "
                  << report.equal << ", counterexamples " << report.counterexamples << ", unsampled " << report.unsampled
                  << "\n";
        for (const auto& f : report.failures) failures.push_back(f);
        reports.push_back(report_to_json(report));
    }
    json doc{{"reports", reports}, {"counterexamples", counterexamples}, {"passed", all_passed}};
    if (!failures.empty()) {
        std::string bundle_path = args.bundle;
        if (bundle_path.empty()) bundle_path = (args.out.empty() || args.out == "-") ? "dominance_bundle.json" : args.out + ".bundle.json";
        json bundle = json::array();
        for (const auto& f : failures) bundle.push_back(bundle_to_json(f));
        json full{{"scenario", scenario_to_json(model)}, {"failures", bundle}};
        write_output(bundle_path, full.dump(2) + "\n");
        doc["bundle"] = bundle_path;
        std::cerr << "[evsched] reproduction bundle written to " << bundle_path << "\n";
    }
    write_output(args.out, doc.dump(2) + "\n");
    return all_passed ? kOk : kFailure;
}

struct ExactArgs {
    std::string scenario;
    double tol = 1e-10;
    std::size_t max_iter = 1'000'000;
    std::size_t max_states = 2'000'000;
    bool exact = false;
    int threads = 1;
    std::string out;
};

int cmd_solve_exact(const ExactArgs& args) {
    const ScenarioModel model = load_scenario(args.scenario);
    log_config("solve-exact", {{"scenario", args.scenario},
                               {"scenario_name", model.name},
                               {"tol", args.tol},
                               {"max_iter", args.max_iter},
                               {"max_states", args.max_states},
                               {"exact", args.exact},
                               {"threads", args.threads}});
    EnumerationOptions eopt;
    eopt.max_states = args.max_states;
    EnumeratedMDP mdp;
    try {
        mdp = enumerate(model, eopt);
    } catch (const StateSpaceTooLarge& e) {
        throw UsageError(e.what());
    }
    RviOptions ropt;
    ropt.tol = args.tol;
    ropt.max_iter = args.max_iter;
    ropt.threads = args.threads;
    DPSolution solution;
    bool converged = true;
    std::string failure;
    try {
        solution = relative_value_iteration(mdp, ropt);
    } catch (const ConvergenceError& e) {
        solution = e.partial();
        converged = false;
        failure = e.what();
    }
    const GainCheck check = verify_constant_gain(mdp, solution, args.tol);
    json doc;
    doc["scenario"] = model.name;
    doc["state_count"] = mdp.state_count();
    doc["constant_gain"] = {{"passed", check.passed()},
                            {"residual", check.residual},
                            {"gain_spread", check.gain_spread},
                            {"recurrent_classes", check.recurrent_classes},
                            {"assumption2", check.assumption2},
                            {"findings", check.findings}};
    if (!converged || !check.passed()) {
        doc["solution"] = solution_to_json(mdp, solution);
        doc["error"] = converged ? "constant-gain verification failed" : failure;
        for (const auto& f : check.findings) std::cerr << "[evsched] finding: " << f << "\n";
        std::cerr << "[evsched] " << doc["error"].get<std::string>() << "\n";
        write_output(args.out, doc.dump(2) + "\n");
        return kFailure;
    }
    if (args.exact) solution = exact_policy_iteration(mdp, std::move(solution));
    const ProjectionResult proj = lllp_projection(mdp, solution, args.tol);
    DPSolution compliant = solution;
    compliant.policy = proj.policy;
    const PolicyEvaluation eval = evaluate_policy(mdp, proj.policy);
    json projection{{"violations_before", proj.violations_before},
                    {"violations_after", proj.violations_after},
                    {"swaps", proj.swaps},
                    {"max_q_increase", proj.max_q_increase},
                    {"gain", eval.max_gain},
                    {"gain_spread", eval.max_gain - eval.min_gain}};
    if (args.exact) projection["exact_gain"] = evaluate_policy_exact(mdp, proj.policy).gain;
    doc["solution"] = solution_to_json(mdp, solution);
    doc["projection"] = projection;
    doc["compliant_policy"] = solution_to_json(mdp, compliant)["policy"];
    std::cerr << "[evsched] gain " << solution.gain << ", residual " << solution.residual << ", iterations "
              << solution.iterations << (solution.damped ? " (damped)" : "") << "\n";
    write_output(args.out, doc.dump(2) + "\n");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deadline scheduling for EV charging: simulation, dominance checks and exact DP"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo policy comparison over an arrival-rate grid");
    simulate->add_option("--scenario", sim.scenario, "Scenario JSON file")->required();
    simulate->add_option("--policies", sim.policies, "Comma list of edf, llsp, lllp");
    simulate->add_option("--penalty", sim.penalty, "Override the penalty: linear | quadratic");
    simulate->add_option("--rates", sim.rates, "Arrival rates: lo:hi or a comma list");
    simulate->add_option("--seed", sim.seed, "Base seed");
    simulate->add_option("--out", sim.out, "CSV output path (stdout if omitted)");
    simulate->add_option("--T", sim.stages, "Stages per trajectory");
    simulate->add_option("--warmup", sim.warmup, "Leading stages excluded from the average");
    simulate->add_option("--n-traj", sim.trajectories, "Trajectories per cell");
    simulate->add_option("--threads", sim.threads, "Worker threads (default: all cores)");

    DominanceArgs dom;
    auto* verify = app.add_subcommand("verify-dominance", "Check that the interchanging policy never costs more");
    verify->add_option("--scenario", dom.scenario, "Scenario JSON file")->required();
    verify->add_option("--policies", dom.policies, "Comma list of policies to certify");
    verify->add_option("--penalty", dom.penalty, "Override the penalty: linear | quadratic");
    verify->add_option("--rate", dom.rate, "Override the arrival count");
    verify->add_option("--cases", dom.cases, "Violation instances per policy");
    verify->add_option("--seed", dom.seed, "Base seed");
    verify->add_option("--search-stages", dom.search_stages, "Stages searched for a violation per case");
    verify->add_option("--burn-in", dom.burn_in, "Violations are taken at a random stage after 0..burn-in");
    verify->add_option("--threads", dom.threads, "Worker threads (default: all cores)");
    verify->add_option("--out", dom.out, "Report JSON path (stdout if omitted)");
    verify->add_option("--bundle", dom.bundle, "Reproduction bundle path for failures");
    verify->add_flag("--two-vehicle", dom.two_vehicle,
                     "Use random two-vehicle start states instead of rollouts (scenario supplies penalty, B, E)");

    ExactArgs ex;
    auto* solve = app.add_subcommand("solve-exact", "Enumerate a small scenario and solve the average-cost DP");
    solve->add_option("--scenario", ex.scenario, "Scenario JSON file")->required();
    solve->add_option("--tol", ex.tol, "Span / residual tolerance");
    solve->add_option("--max-iter", ex.max_iter, "Relative value iteration limit");
    solve->add_option("--max-states", ex.max_states, "State ceiling");
    solve->add_flag("--exact", ex.exact, "Refine with rational policy iteration");
    solve->add_option("--threads", ex.threads, "Worker threads");
    solve->add_option("--out", ex.out, "Solution JSON path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim);
        if (verify->parsed()) return cmd_verify_dominance(dom);
        if (solve->parsed()) return cmd_solve_exact(ex);
    } catch (const UsageError& e) {
        std::cerr << "evsched: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "evsched: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "evsched: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
