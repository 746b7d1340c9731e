#include "evsched/scenario_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace evsched {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

int get_int(const json& value, const std::string& where) {
    if (!value.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return value.get<int>();
}

std::vector<Rational> rational_list(const json& value, const std::string& where) {
    if (!value.is_array()) throw ConfigError(where + ": expected an array");
    std::vector<Rational> out;
    for (std::size_t k = 0; k < value.size(); ++k) out.push_back(rational_from_json(value[k], where + "[" + std::to_string(k) + "]"));
    return out;
}

Distribution distribution(const json& value, const std::string& where) {
    try {
        return Distribution::from_probabilities(rational_list(value, where));
    } catch (const ModelError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

std::vector<Distribution> kernel(const json& value, std::size_t states, const std::string& where) {
    if (!value.is_array() || value.size() != states)
        throw ConfigError(where + ": expected " + std::to_string(states) + " rows");
    std::vector<Distribution> rows;
    for (std::size_t k = 0; k < states; ++k) {
        rows.push_back(distribution(value[k], where + "[" + std::to_string(k) + "]"));
        if (rows.back().size() != states)
            throw ConfigError(where + "[" + std::to_string(k) + "]: expected " + std::to_string(states) + " entries");
    }
    return rows;
}

PenaltyFunction parse_penalty(const json& value, int E) {
    const std::string where = "penalty";
    try {
        if (value.is_string()) return make_penalty(parse_penalty_kind(value.get<std::string>()), E);
        if (value.is_array()) return PenaltyFunction::from_table(rational_list(value, where), "custom");
        check_keys(value, {"values", "allow_nonconvex", "name"}, where);
        if (!value.contains("values")) throw ConfigError(where + ": 'values' is required");
        const bool nonconvex = value.value("allow_nonconvex", false);
        const std::string name = value.value("name", std::string(nonconvex ? "nonconvex" : "custom"));
        auto values = rational_list(value.at("values"), where + ".values");
        return nonconvex ? PenaltyFunction::from_table_unchecked(std::move(values), name)
                         : PenaltyFunction::from_table(std::move(values), name);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

GridModel parse_grid(const json& g, int N, const PenaltyFunction& penalty) {
    check_keys(g, {"states", "iid_uniform", "iid", "kernel", "kernel_by_action", "initial", "cost", "overload"}, "grid");
    std::vector<int> values;
    int sources = 0;
    for (const char* k : {"iid_uniform", "iid", "kernel", "kernel_by_action"}) sources += g.contains(k) ? 1 : 0;
    if (sources != 1) throw ConfigError("grid: give exactly one of iid_uniform, iid, kernel, kernel_by_action");
    if (g.contains("iid_uniform")) {
        const auto& r = g.at("iid_uniform");
        if (g.contains("states")) throw ConfigError("grid: 'states' is implied by iid_uniform");
        if (!r.is_array() || r.size() != 2) throw ConfigError("grid.iid_uniform: expected [lo, hi]");
        const int lo = get_int(r[0], "grid.iid_uniform[0]");
        const int hi = get_int(r[1], "grid.iid_uniform[1]");
        if (hi < lo) throw ConfigError("grid.iid_uniform: hi < lo");
        for (int v = lo; v <= hi; ++v) values.push_back(v);
    } else {
        if (!g.contains("states")) throw ConfigError("grid: 'states' is required");
        const auto& s = g.at("states");
        if (s.is_number_integer()) {
            const int n = get_int(s, "grid.states");
            if (n < 1) throw ConfigError("grid.states: need at least one state");
            for (int v = 0; v < n; ++v) values.push_back(v);
        } else if (s.is_array()) {
            for (std::size_t k = 0; k < s.size(); ++k) values.push_back(get_int(s[k], "grid.states[" + std::to_string(k) + "]"));
            if (values.empty()) throw ConfigError("grid.states: need at least one state");
        } else {
            throw ConfigError("grid.states: expected a count or a list of values");
        }
    }
    const std::size_t S = values.size();

    ChargingCost cost;
    const json c = g.value("cost", json("capacity"));
    if (c.is_string()) {
        const auto name = c.get<std::string>();
        if (name == "capacity") {
            const Rational overload = g.contains("overload") ? rational_from_json(g.at("overload"), "grid.overload")
                                                             : Rational{N} * penalty(penalty.max_units());
            cost = ChargingCost::capacity(values, overload);
        } else if (name == "quadratic") {
            if (g.contains("overload")) throw ConfigError("grid.overload only applies to capacity cost");
            cost = ChargingCost::quadratic(values);
        } else {
            throw ConfigError("grid.cost: unknown cost '" + name + "' (expected capacity|quadratic|table)");
        }
    } else if (c.is_array()) {
        if (g.contains("overload")) throw ConfigError("grid.overload only applies to capacity cost");
        if (c.size() != static_cast<std::size_t>(N) + 1) throw ConfigError("grid.cost: table needs N+1 rows (A = 0..N)");
        std::vector<std::vector<Rational>> table;
        for (std::size_t a = 0; a < c.size(); ++a) {
            table.push_back(rational_list(c[a], "grid.cost[" + std::to_string(a) + "]"));
            if (table.back().size() != S) throw ConfigError("grid.cost: each row needs one entry per grid state");
        }
        cost = ChargingCost::table(std::move(table));
    } else {
        throw ConfigError("grid.cost: expected a name or a table");
    }

    GridModel grid;
    if (g.contains("iid_uniform")) {
        grid = GridModel::iid(values, Distribution::uniform(S), cost);
    } else if (g.contains("iid")) {
        Distribution next = distribution(g.at("iid"), "grid.iid");
        if (next.size() != S) throw ConfigError("grid.iid: needs one entry per grid state");
        grid = GridModel::iid(values, next, cost);
    } else if (g.contains("kernel")) {
        grid = GridModel::markov(values, kernel(g.at("kernel"), S, "grid.kernel"), cost);
    } else {
        const auto& k = g.at("kernel_by_action");
        if (!k.is_array() || k.size() != static_cast<std::size_t>(N) + 1)
            throw ConfigError("grid.kernel_by_action: needs N+1 blocks (A = 0..N)");
        std::vector<std::vector<Distribution>> blocks;
        for (std::size_t a = 0; a < k.size(); ++a)
            blocks.push_back(kernel(k[a], S, "grid.kernel_by_action[" + std::to_string(a) + "]"));
        grid = GridModel::action_dependent(values, std::move(blocks), cost);
    }
    if (g.contains("initial")) {
        Distribution init = distribution(g.at("initial"), "grid.initial");
        if (init.size() != S) throw ConfigError("grid.initial: needs one entry per grid state");
        grid.set_initial(std::move(init));
    }
    return grid;
}

ArrivalLaw parse_arrival(const json& a, int B, const std::string& where) {
    if (a.is_string()) {
        if (a.get<std::string>() == "none") return ArrivalLaw::none();
        throw ConfigError(where + ": expected an object or \"none\"");
    }
    check_keys(a, {"count", "marks"}, where);
    if (!a.contains("count")) throw ConfigError(where + ": 'count' is required");
    const auto& c = a.at("count");
    Distribution count;
    if (c.is_number_integer()) {
        const int n = get_int(c, where + ".count");
        if (n < 0) throw ConfigError(where + ".count: must be >= 0");
        count = Distribution::point(static_cast<std::size_t>(n) + 1, static_cast<std::size_t>(n));
    } else {
        count = distribution(c, where + ".count");
    }
    const json marks = a.value("marks", json("uniform_stay_request"));
    ArrivalLaw law;
    if (marks.is_string()) {
        if (marks.get<std::string>() != "uniform_stay_request")
            throw ConfigError(where + ".marks: unknown law '" + marks.get<std::string>() + "'");
        law = ArrivalLaw::uniform_stay_request(0, B);
    } else if (marks.is_array()) {
        std::vector<Rational> probs;
        for (std::size_t k = 0; k < marks.size(); ++k) {
            const std::string w = where + ".marks[" + std::to_string(k) + "]";
            check_keys(marks[k], {"lambda", "gamma", "p"}, w);
            if (!marks[k].contains("lambda") || !marks[k].contains("gamma"))
                throw ConfigError(w + ": 'lambda' and 'gamma' are required");
            law.marks.push_back({get_int(marks[k].at("lambda"), w + ".lambda"), get_int(marks[k].at("gamma"), w + ".gamma")});
            probs.push_back(marks[k].contains("p") ? rational_from_json(marks[k].at("p"), w + ".p")
                                                   : Rational{1, static_cast<std::int64_t>(marks.size())});
        }
        if (law.marks.empty()) throw ConfigError(where + ".marks: need at least one mark");
        try {
            law.mark_probabilities = Distribution::from_probabilities(std::move(probs));
        } catch (const ModelError& e) {
            throw ConfigError(where + ".marks: " + e.what());
        }
    } else {
        throw ConfigError(where + ".marks: expected a law name or a list");
    }
    law.count = std::move(count);
    return law;
}

DemandModel parse_demand(const json& doc, int B) {
    const json d = doc.value("demand", json::object());
    check_keys(d, {"states", "kernel", "initial"}, "demand");
    const int D = d.contains("states") ? get_int(d.at("states"), "demand.states") : 1;
    if (D < 1) throw ConfigError("demand.states: need at least one state");
    std::vector<Distribution> rows;
    if (d.contains("kernel")) {
        rows = kernel(d.at("kernel"), static_cast<std::size_t>(D), "demand.kernel");
    } else if (D == 1) {
        rows.push_back(Distribution::point(1, 0));
    } else {
        throw ConfigError("demand.kernel is required when demand has more than one state");
    }
    std::vector<ArrivalLaw> laws;
    const json a = doc.value("arrival", json("none"));
    if (a.is_array()) {
        if (a.size() != static_cast<std::size_t>(D)) throw ConfigError("arrival: needs one law per demand state");
        for (std::size_t k = 0; k < a.size(); ++k) laws.push_back(parse_arrival(a[k], B, "arrival[" + std::to_string(k) + "]"));
    } else {
        const ArrivalLaw law = parse_arrival(a, B, "arrival");
        laws.assign(static_cast<std::size_t>(D), law);
    }
    DemandModel demand(std::move(rows), std::move(laws));
    if (d.contains("initial")) {
        Distribution init = distribution(d.at("initial"), "demand.initial");
        if (init.size() != static_cast<std::size_t>(D)) throw ConfigError("demand.initial: needs one entry per state");
        demand.set_initial(std::move(init));
    }
    return demand;
}

BudgetSpec parse_budget(const json& value) {
    if (value.is_string()) {
        const auto name = value.get<std::string>();
        if (name == "grid_capacity") return {BudgetSpec::Kind::GridCapacity, 0};
        if (name == "unlimited") return {BudgetSpec::Kind::Unlimited, 0};
        throw ConfigError("budget: unknown rule '" + name + "' (expected grid_capacity|unlimited|{\"constant\": k})");
    }
    if (value.is_number_integer()) return {BudgetSpec::Kind::Constant, get_int(value, "budget")};
    check_keys(value, {"constant"}, "budget");
    if (!value.contains("constant")) throw ConfigError("budget: 'constant' is required");
    return {BudgetSpec::Kind::Constant, get_int(value.at("constant"), "budget.constant")};
}

json distribution_to_json(const Distribution& d) {
    json out = json::array();
    for (const auto& p : d.probabilities()) out.push_back(rational_to_json(p));
    return out;
}

json arrival_to_json(const ArrivalLaw& law) {
    json marks = json::array();
    for (std::size_t k = 0; k < law.marks.size(); ++k)
        marks.push_back({{"lambda", law.marks[k].lambda},
                         {"gamma", law.marks[k].gamma},
                         {"p", rational_to_json(law.mark_probabilities.probability(k))}});
    return {{"count", distribution_to_json(law.count)}, {"marks", std::move(marks)}};
}

}  // namespace

Rational rational_from_json(const json& value, const std::string& where) {
    try {
        if (value.is_number_integer()) return Rational{value.get<std::int64_t>()};
        if (value.is_number_float()) return Rational::parse(value.dump());
        if (value.is_string()) return Rational::parse(value.get<std::string>());
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": expected a number or a \"p/q\" string");
}

json rational_to_json(const Rational& value) {
    if (value.is_integer()) return value.num();
    return value.to_string();
}

ScenarioModel scenario_from_json(const json& doc) {
    check_keys(doc, {"name", "description", "N", "B", "E", "grid", "demand", "arrival", "penalty", "budget", "admission"},
               "scenario");
    for (const char* k : {"N", "B", "E", "grid"})
        if (!doc.contains(k)) throw ConfigError(std::string("scenario: '") + k + "' is required");
    ScenarioModel m;
    m.name = doc.value("name", std::string("scenario"));
    m.dims = {get_int(doc.at("N"), "N"), get_int(doc.at("B"), "B"), get_int(doc.at("E"), "E")};
    if (m.dims.chargers < 0 || m.dims.max_stay < 1 || m.dims.max_request < 1)
        throw ConfigError("scenario: need N >= 0, B >= 1, E >= 1");
    m.penalty = parse_penalty(doc.value("penalty", json("linear")), m.dims.max_request);
    m.grid = parse_grid(doc.at("grid"), m.dims.chargers, m.penalty);
    m.demand = parse_demand(doc, m.dims.max_stay);
    m.budget = parse_budget(doc.value("budget", json("grid_capacity")));
    const std::string admission = doc.value("admission", std::string("lowest_index"));
    if (admission != "lowest_index") throw ConfigError("admission: only 'lowest_index' is supported");
    try {
        m.validate();
    } catch (const ModelError& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return m;
}

ScenarioModel scenario_from_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return scenario_from_json(doc);
}

ScenarioModel load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return scenario_from_string(buffer.str());
}

json scenario_to_json(const ScenarioModel& model) {
    json doc;
    doc["name"] = model.name;
    doc["N"] = model.dims.chargers;
    doc["B"] = model.dims.max_stay;
    doc["E"] = model.dims.max_request;

    json grid;
    grid["states"] = std::vector<int>(model.grid.values().begin(), model.grid.values().end());
    const int S = model.grid.state_count();
    switch (model.grid.transition_kind()) {
        case GridModel::TransitionKind::Iid: grid["iid"] = distribution_to_json(model.grid.transition(0, 0)); break;
        case GridModel::TransitionKind::Markov: {
            json rows = json::array();
            for (int s = 0; s < S; ++s) rows.push_back(distribution_to_json(model.grid.transition(s, 0)));
            grid["kernel"] = std::move(rows);
            break;
        }
        case GridModel::TransitionKind::ActionDependent: {
            json blocks = json::array();
            for (int a = 0; a <= model.dims.chargers; ++a) {
                json rows = json::array();
                for (int s = 0; s < S; ++s) rows.push_back(distribution_to_json(model.grid.transition(s, a)));
                blocks.push_back(std::move(rows));
            }
            grid["kernel_by_action"] = std::move(blocks);
            break;
        }
    }
    grid["initial"] = distribution_to_json(model.grid.initial());
    const ChargingCost& cost = model.grid.cost_function();
    const std::vector<int> values(model.grid.values().begin(), model.grid.values().end());
    switch (cost.kind()) {
        case ChargingCost::Kind::Capacity:
            if (cost.per_state() != values) throw ModelError("capacity cost does not follow the grid values");
            grid["cost"] = "capacity";
            grid["overload"] = rational_to_json(cost.overload());
            break;
        case ChargingCost::Kind::Quadratic:
            if (cost.per_state() != values) throw ModelError("quadratic cost does not follow the grid values");
            grid["cost"] = "quadratic";
            break;
        case ChargingCost::Kind::Table: {
            json table = json::array();
            for (const auto& row : cost.cost_table()) {
                json r = json::array();
                for (const auto& v : row) r.push_back(rational_to_json(v));
                table.push_back(std::move(r));
            }
            grid["cost"] = std::move(table);
            break;
        }
    }
    doc["grid"] = std::move(grid);

    const int D = model.demand.state_count();
    json kernel_rows = json::array();
    json laws = json::array();
    for (int d = 0; d < D; ++d) {
        kernel_rows.push_back(distribution_to_json(model.demand.transition(d)));
        laws.push_back(arrival_to_json(model.demand.law(d)));
    }
    doc["demand"] = {{"states", D}, {"kernel", std::move(kernel_rows)}, {"initial", distribution_to_json(model.demand.initial())}};
    doc["arrival"] = std::move(laws);

    json penalty = json::array();
    for (const auto& v : model.penalty.table()) penalty.push_back(rational_to_json(v));
    const bool convex = model.penalty.has_convex_increments();
    doc["penalty"] = {{"values", std::move(penalty)}, {"allow_nonconvex", !convex}, {"name", model.penalty.name()}};

    switch (model.budget.kind) {
        case BudgetSpec::Kind::GridCapacity: doc["budget"] = "grid_capacity"; break;
        case BudgetSpec::Kind::Unlimited: doc["budget"] = "unlimited"; break;
        case BudgetSpec::Kind::Constant: doc["budget"] = {{"constant", model.budget.constant}}; break;
    }
    doc["admission"] = "lowest_index";
    return doc;
}

json state_to_json(const SystemState& x) {
    json vehicles = json::array();
    for (const auto& v : x.vehicles) vehicles.push_back({v.lambda, v.gamma});
    return {{"vehicles", std::move(vehicles)}, {"grid", x.grid}, {"demand", x.demand}};
}

SystemState state_from_json(const json& doc) {
    check_keys(doc, {"vehicles", "grid", "demand"}, "state");
    SystemState x;
    if (!doc.contains("vehicles") || !doc.at("vehicles").is_array()) throw ConfigError("state.vehicles: expected an array");
    for (const auto& v : doc.at("vehicles")) {
        if (!v.is_array() || v.size() != 2) throw ConfigError("state.vehicles: expected [lambda, gamma] pairs");
        x.vehicles.push_back({get_int(v[0], "state.vehicles"), get_int(v[1], "state.vehicles")});
    }
    x.grid = doc.contains("grid") ? get_int(doc.at("grid"), "state.grid") : 0;
    x.demand = doc.contains("demand") ? get_int(doc.at("demand"), "state.demand") : 0;
    return x;
}

json solution_to_json(const EnumeratedMDP& mdp, const DPSolution& solution) {
    json policy = json::array();
    for (std::uint32_t x = 0; x < mdp.state_count(); ++x) {
        const ActionVector a = mdp.action_vector(solution.policy.at(x));
        json bits = json::array();
        for (std::size_t k = 0; k < a.size(); ++k) bits.push_back(a[k] ? 1 : 0);
        policy.push_back(std::move(bits));
    }
    json states = json::array();
    for (std::uint32_t x = 0; x < mdp.state_count(); ++x) states.push_back(state_to_json(mdp.decode(x)));
    json out{{"gain", solution.gain},
             {"h", solution.h},
             {"policy", std::move(policy)},
             {"states", std::move(states)},
             {"residual", solution.residual},
             {"iterations", solution.iterations},
             {"span", solution.span},
             {"converged", solution.converged},
             {"damped", solution.damped},
             {"damping", solution.damping},
             {"special_state", mdp.special_state()}};
    if (solution.exact) {
        out["exact_gain"] = solution.exact_gain;
        out["exact_h"] = solution.exact_h;
        out["exact_iterations"] = solution.exact_iterations;
    }
    return out;
}

json bundle_to_json(const ReproductionBundle& b) {
    json out{{"policy", b.policy},
             {"seed", b.seed},
             {"stage", b.stage},
             {"state", state_to_json(b.state)},
             {"pair", {{"i", b.pair.i}, {"j", b.pair.j}}},
             {"span", b.span},
             {"horizon", b.horizon},
             {"cost_base", rational_to_json(b.cost_base)},
             {"cost_interchange", rational_to_json(b.cost_interchange)},
             {"reason", b.reason}};
    out["swap_back"] = b.swap_back ? json(*b.swap_back) : json(nullptr);
    return out;
}

json report_to_json(const DominanceReport& r) {
    json failures = json::array();
    for (const auto& b : r.failures) failures.push_back(bundle_to_json(b));
    return {{"policy", r.policy},
            {"penalty", r.penalty},
            {"penalty_convex", r.penalty_convex},
            {"cases", r.cases},
            {"strict", r.strict},
            {"equal", r.equal},
            {"counterexamples", r.counterexamples},
            {"swap_back_empty", r.swap_back_empty},
            {"swap_back_found", r.swap_back_found},
            {"shortfall_identity_failures", r.shortfall_identity_failures},
            {"equal_total_failures", r.equal_total_failures},
            {"unsampled", r.unsampled},
            {"passed", r.passed()},
            {"failures", std::move(failures)}};
}

}  // namespace evsched
