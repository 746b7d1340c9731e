#include "evsched/models.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace evsched {

Distribution Distribution::from_probabilities(std::vector<Rational> probabilities, double tolerance) {
    if (probabilities.empty()) throw ModelError("distribution must have at least one outcome");
    Rational sum{0};
    for (const auto& p : probabilities) {
        if (p < Rational{0}) throw ModelError("negative probability " + p.to_string());
        sum += p;
    }
    if (sum != Rational{1}) {
        if (std::abs(sum.to_double() - 1.0) > tolerance)
            throw ModelError("probabilities sum to " + sum.to_string() + ", not 1");
        auto last = std::find_if(probabilities.rbegin(), probabilities.rend(),
                                 [](const Rational& p) { return p > Rational{0}; });
        *last += Rational{1} - sum;
        if (*last < Rational{0}) throw ModelError("probability row cannot be renormalised");
    }
    Distribution d;
    d.probabilities_ = std::move(probabilities);
    d.cumulative_.resize(d.probabilities_.size());
    Rational running{0};
    for (std::size_t k = 0; k < d.probabilities_.size(); ++k) {
        running += d.probabilities_[k];
        d.cumulative_[k] = running.to_double();
    }
    // The last outcome with positive mass must catch every u < 1.
    for (std::size_t k = d.probabilities_.size(); k-- > 0;) {
        if (d.probabilities_[k] > Rational{0}) {
            for (std::size_t m = k; m < d.cumulative_.size(); ++m) d.cumulative_[m] = 2.0;
            break;
        }
    }
    return d;
}

Distribution Distribution::point(std::size_t size, std::size_t index) {
    std::vector<Rational> p(size, Rational{0});
    p.at(index) = Rational{1};
    return from_probabilities(std::move(p));
}

Distribution Distribution::uniform(std::size_t size) {
    std::vector<Rational> p(size, Rational{1, static_cast<std::int64_t>(size)});
    return from_probabilities(std::move(p));
}

int Distribution::sample(double u) const {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(it - cumulative_.begin());
}

GridModel GridModel::iid(std::vector<int> values, Distribution next, ChargingCost cost) {
    GridModel g;
    g.kind_ = TransitionKind::Iid;
    g.values_ = std::move(values);
    g.initial_ = next;
    g.rows_ = {{std::move(next)}};
    g.cost_ = std::move(cost);
    return g;
}

GridModel GridModel::markov(std::vector<int> values, std::vector<Distribution> rows, ChargingCost cost) {
    GridModel g;
    g.kind_ = TransitionKind::Markov;
    g.initial_ = Distribution::uniform(values.size());
    g.values_ = std::move(values);
    g.rows_ = {std::move(rows)};
    g.cost_ = std::move(cost);
    return g;
}

GridModel GridModel::action_dependent(std::vector<int> values, std::vector<std::vector<Distribution>> rows_by_aggregate,
                                      ChargingCost cost) {
    GridModel g;
    g.kind_ = TransitionKind::ActionDependent;
    g.initial_ = Distribution::uniform(values.size());
    g.values_ = std::move(values);
    g.rows_ = std::move(rows_by_aggregate);
    g.cost_ = std::move(cost);
    return g;
}

const Distribution& GridModel::transition(int s, int aggregate) const {
    switch (kind_) {
        case TransitionKind::Iid: return rows_[0][0];
        case TransitionKind::Markov: return rows_[0].at(static_cast<std::size_t>(s));
        case TransitionKind::ActionDependent:
            return rows_.at(static_cast<std::size_t>(aggregate)).at(static_cast<std::size_t>(s));
    }
    return rows_[0][0];
}

int GridModel::sample(int s, int aggregate, RandomStream& stream) const {
    return transition(s, aggregate).sample(stream.uniform());
}

void GridModel::set_initial(Distribution initial) { initial_ = std::move(initial); }

void GridModel::validate(int chargers) const {
    const auto states = values_.size();
    if (states == 0) throw ModelError("grid needs at least one state");
    auto check_row = [&](const Distribution& row) {
        if (row.size() != states) throw ModelError("grid kernel row has wrong width");
    };
    switch (kind_) {
        case TransitionKind::Iid: check_row(rows_.at(0).at(0)); break;
        case TransitionKind::Markov:
            if (rows_.at(0).size() != states) throw ModelError("grid kernel must have one row per state");
            for (const auto& row : rows_[0]) check_row(row);
            break;
        case TransitionKind::ActionDependent:
            if (rows_.size() != static_cast<std::size_t>(chargers) + 1)
                throw ModelError("action-dependent grid kernel needs N+1 blocks, one per aggregate action");
            for (const auto& block : rows_) {
                if (block.size() != states) throw ModelError("grid kernel block must have one row per state");
                for (const auto& row : block) check_row(row);
            }
            break;
    }
    if (initial_.size() != states) throw ModelError("grid initial distribution has wrong width");
    for (int s = 0; s < static_cast<int>(states); ++s) (void)cost_(0, s);
}

ArrivalLaw ArrivalLaw::none() {
    return ArrivalLaw{Distribution::point(1, 0), {VehicleState{1, 1}}, Distribution::point(1, 0)};
}

ArrivalLaw ArrivalLaw::fixed_count(int count, std::vector<VehicleState> marks, Distribution mark_probabilities) {
    return ArrivalLaw{Distribution::point(static_cast<std::size_t>(count) + 1, static_cast<std::size_t>(count)),
                      std::move(marks), std::move(mark_probabilities)};
}

ArrivalLaw ArrivalLaw::uniform_stay_request(int count, int max_stay) {
    std::vector<VehicleState> marks;
    std::vector<Rational> probs;
    for (int stay = 1; stay <= max_stay; ++stay) {
        for (int request = 1; request <= stay; ++request) {
            marks.push_back({stay, request});
            probs.emplace_back(1, static_cast<std::int64_t>(max_stay) * stay);
        }
    }
    return fixed_count(count, std::move(marks), Distribution::from_probabilities(std::move(probs)));
}

Rational ArrivalLaw::zero_arrival_probability() const { return count.probability(0); }

DemandModel::DemandModel(std::vector<Distribution> kernel, std::vector<ArrivalLaw> laws)
    : kernel_(std::move(kernel)), laws_(std::move(laws)), initial_(Distribution::uniform(kernel_.empty() ? 1 : kernel_.size())) {}

DemandModel DemandModel::single(ArrivalLaw law) {
    return DemandModel({Distribution::point(1, 0)}, {std::move(law)});
}

void DemandModel::set_initial(Distribution initial) { initial_ = std::move(initial); }

DemandDraw DemandModel::sample(int d, RandomStream& transition, RandomStream& marks) const {
    DemandDraw out;
    sample_into(d, transition, marks, out);
    return out;
}

void DemandModel::sample_into(int d, RandomStream& transition, RandomStream& marks, DemandDraw& out) const {
    out.next = kernel_.at(static_cast<std::size_t>(d)).sample(transition.uniform());
    const ArrivalLaw& arrival = law(d);
    const int count = arrival.count.sample(marks.uniform());
    out.arrivals.clear();
    for (int k = 0; k < count; ++k)
        out.arrivals.push_back(arrival.marks[static_cast<std::size_t>(arrival.mark_probabilities.sample(marks.uniform()))]);
}

bool DemandModel::irreducible() const {
    const auto n = kernel_.size();
    for (std::size_t start = 0; start < n; ++start) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{start};
        seen[start] = 1;
        std::size_t visited = 1;
        while (!stack.empty()) {
            const auto d = stack.back();
            stack.pop_back();
            const auto probs = kernel_[d].probabilities();
            for (std::size_t e = 0; e < n; ++e) {
                if (probs[e] > Rational{0} && !seen[e]) {
                    seen[e] = 1;
                    ++visited;
                    stack.push_back(e);
                }
            }
        }
        if (visited != n) return false;
    }
    return true;
}

void DemandModel::validate(const Dimensions& dims) const {
    const auto n = kernel_.size();
    if (n == 0) throw ModelError("demand needs at least one state");
    if (laws_.size() != n) throw ModelError("demand needs one arrival law per state");
    for (const auto& row : kernel_)
        if (row.size() != n) throw ModelError("demand kernel row has wrong width");
    if (initial_.size() != n) throw ModelError("demand initial distribution has wrong width");
    for (const auto& law : laws_) {
        if (law.marks.size() != law.mark_probabilities.size())
            throw ModelError("arrival marks and their probabilities differ in length");
        for (const auto& m : law.marks) {
            if (m.lambda < 1 || m.lambda > dims.max_stay || m.gamma < 0 || m.gamma > dims.max_request)
                throw ModelError("arrival initial state (" + std::to_string(m.lambda) + "," + std::to_string(m.gamma) +
                                 ") outside 1..B x 0..E");
        }
    }
}

AdmitResult admit(std::vector<VehicleState> vehicles, std::span<const VehicleState> arrivals) {
    AdmitResult out;
    out.rejected = admit_in_place(vehicles, arrivals);
    out.vehicles = std::move(vehicles);
    return out;
}

int admit_in_place(std::vector<VehicleState>& vehicles, std::span<const VehicleState> arrivals) {
    std::size_t slot = 0;
    std::size_t placed = 0;
    for (; placed < arrivals.size(); ++placed) {
        while (slot < vehicles.size() && vehicles[slot].present()) ++slot;
        if (slot == vehicles.size()) break;
        vehicles[slot++] = arrivals[placed];
    }
    return static_cast<int>(arrivals.size() - placed);
}

std::string to_string(PenaltyKind kind) { return kind == PenaltyKind::Linear ? "linear" : "quadratic"; }

PenaltyKind parse_penalty_kind(std::string_view name) {
    if (name == "linear") return PenaltyKind::Linear;
    if (name == "quadratic") return PenaltyKind::Quadratic;
    throw std::invalid_argument("unknown penalty kind '" + std::string(name) + "' (expected linear|quadratic)");
}

PenaltyFunction make_penalty(PenaltyKind kind, int max_request) {
    return kind == PenaltyKind::Linear ? PenaltyFunction::linear(max_request) : PenaltyFunction::quadratic(max_request);
}

void ScenarioModel::validate() const {
    if (dims.chargers < 0 || dims.max_stay < 1 || dims.max_request < 1)
        throw ModelError("need N >= 0, B >= 1, E >= 1");
    if (penalty.max_units() != dims.max_request) throw ModelError("penalty table must cover q(0..E)");
    grid.validate(dims.chargers);
    demand.validate(dims);
    if (budget.kind == BudgetSpec::Kind::Constant && budget.constant < 0) throw ModelError("budget must be >= 0");
}

SystemState ScenarioModel::empty_state(int grid_state, int demand_state) const {
    SystemState x;
    x.vehicles.assign(static_cast<std::size_t>(dims.chargers), kEmptyCharger);
    x.grid = grid_state;
    x.demand = demand_state;
    return x;
}

ScenarioModel scenario_sec5(int arrival_rate, PenaltyKind penalty) {
    if (arrival_rate < 0) throw std::invalid_argument("arrival rate must be >= 0");
    constexpr int kChargers = 400;
    constexpr int kStay = 10;
    constexpr int kRequest = 10;
    ScenarioModel m;
    m.name = "capacity-benchmark";
    m.dims = {kChargers, kStay, kRequest};
    m.penalty = make_penalty(penalty, kRequest);
    std::vector<int> capacities;
    for (int c = 40; c <= 160; ++c) capacities.push_back(c);
    const Rational overload = Rational{kChargers} * m.penalty(kRequest);
    m.grid = GridModel::iid(capacities, Distribution::uniform(capacities.size()),
                            ChargingCost::capacity(capacities, overload));
    m.demand = DemandModel::single(ArrivalLaw::uniform_stay_request(arrival_rate, kStay));
    m.budget = {BudgetSpec::Kind::GridCapacity, 0};
    return m;
}

StageResult advance_stage(const ScenarioModel& model, SystemState& x, const ActionVector& a, std::uint64_t seed,
                          std::int64_t stage) {
    check_feasible(x, a);
    StageResult out;
    out.aggregate = a.aggregate();
    out.cost.charging = model.grid.cost(out.aggregate, x.grid);
    for (std::size_t i = 0; i < x.vehicles.size(); ++i) {
        auto& v = x.vehicles[i];
        if (!v.present()) continue;
        const int charged = a[i] ? 1 : 0;
        if (v.lambda == 1) {
            out.cost.penalty += model.penalty(v.gamma - charged);
            v = kEmptyCharger;
        } else {
            v.lambda -= 1;
            v.gamma -= charged;
        }
    }

    thread_local DemandDraw draw;
    RandomStream demand_stream(seed, stage, StreamSource::Demand);
    RandomStream arrival_stream(seed, stage, StreamSource::Arrivals);
    model.demand.sample_into(x.demand, demand_stream, arrival_stream, draw);
    out.rejected = admit_in_place(x.vehicles, draw.arrivals);

    RandomStream grid_stream(seed, stage, StreamSource::Grid);
    const int next_grid = model.grid.sample(x.grid, out.aggregate, grid_stream);
    x.demand = draw.next;
    x.grid = next_grid;
    return out;
}

SystemState initial_state(const ScenarioModel& model, std::uint64_t seed) {
    RandomStream grid_stream(seed, -1, StreamSource::Initial);
    const int grid = model.grid.initial().sample(grid_stream.uniform());
    const int demand = model.demand.initial().sample(grid_stream.uniform());
    return model.empty_state(grid, demand);
}

}  // namespace evsched
