#include "evsched/core.hpp"

#include <sstream>
#include <utility>

namespace evsched {

void validate(const VehicleState& v, const Dimensions& dims) {
    if (v.lambda < 0 || v.lambda > dims.max_stay || v.gamma < 0 || v.gamma > dims.max_request ||
        (v.lambda == 0 && v.gamma != 0)) {
        std::ostringstream msg;
        msg << "invalid vehicle state (" << v.lambda << "," << v.gamma << ") for B=" << dims.max_stay
            << " E=" << dims.max_request;
        throw InvalidStateError(msg.str());
    }
}

std::string to_string(PriorityOrdering ordering) {
    switch (ordering) {
        case PriorityOrdering::JOverI: return "j_over_i";
        case PriorityOrdering::IOverJ: return "i_over_j";
        case PriorityOrdering::Equal: return "equal";
        case PriorityOrdering::Incomparable: return "incomparable";
    }
    return "unknown";
}

PriorityOrdering compare_priority(const VehicleState& vi, const VehicleState& vj, int max_stay) {
    if (!vi.present() || !vj.present()) throw InvalidStateError("compare_priority: both vehicles must be present");
    if (has_priority_over(vj, vi, max_stay)) return PriorityOrdering::JOverI;
    if (has_priority_over(vi, vj, max_stay)) return PriorityOrdering::IOverJ;
    if (laxity(vi, max_stay) == laxity(vj, max_stay) && vi.gamma == vj.gamma) return PriorityOrdering::Equal;
    return PriorityOrdering::Incomparable;
}

PenaltyFunction PenaltyFunction::from_table_unchecked(std::vector<Rational> values, std::string name) {
    if (values.empty()) throw std::invalid_argument("penalty table must cover q(0)");
    if (values.front() != Rational{0}) throw std::invalid_argument("penalty table must have q(0) = 0");
    PenaltyFunction q;
    q.values_ = std::move(values);
    q.name_ = std::move(name);
    return q;
}

PenaltyFunction PenaltyFunction::from_table(std::vector<Rational> values, std::string name) {
    PenaltyFunction q = from_table_unchecked(std::move(values), std::move(name));
    if (!q.has_convex_increments())
        throw std::invalid_argument("penalty increments must be non-negative and non-decreasing");
    return q;
}

PenaltyFunction PenaltyFunction::linear(int max_request) {
    std::vector<Rational> values;
    for (int n = 0; n <= max_request; ++n) values.emplace_back(n);
    return from_table(std::move(values), "linear");
}

PenaltyFunction PenaltyFunction::quadratic(int max_request) {
    std::vector<Rational> values;
    for (int n = 0; n <= max_request; ++n) values.emplace_back(static_cast<std::int64_t>(n) * n);
    return from_table(std::move(values), "quadratic");
}

const Rational& PenaltyFunction::operator()(int units) const {
    if (units < 0 || units > max_units()) throw std::out_of_range("penalty argument outside 0..E");
    return values_[static_cast<std::size_t>(units)];
}

bool PenaltyFunction::has_convex_increments() const {
    if (values_.size() < 2) return true;
    Rational previous = values_[1] - values_[0];
    if (previous < Rational{0}) return false;
    for (std::size_t n = 2; n < values_.size(); ++n) {
        const Rational increment = values_[n] - values_[n - 1];
        if (increment < previous) return false;
        previous = increment;
    }
    return true;
}

ActionVector ActionVector::from_bits(std::vector<std::uint8_t> bits) {
    ActionVector a;
    for (auto& b : bits) {
        b = b != 0 ? 1 : 0;
        a.aggregate_ += b;
    }
    a.bits_ = std::move(bits);
    return a;
}

void ActionVector::set(std::size_t charger, bool charge) {
    auto& bit = bits_.at(charger);
    const std::uint8_t next = charge ? 1 : 0;
    aggregate_ += static_cast<int>(next) - static_cast<int>(bit);
    bit = next;
}

int unfinished_count(const SystemState& x) {
    int count = 0;
    for (const auto& v : x.vehicles) count += v.chargeable() ? 1 : 0;
    return count;
}

void validate(const SystemState& x, const Dimensions& dims, int grid_states, int demand_states) {
    if (static_cast<int>(x.vehicles.size()) != dims.chargers)
        throw InvalidStateError("system state has " + std::to_string(x.vehicles.size()) + " chargers, expected " +
                                std::to_string(dims.chargers));
    for (const auto& v : x.vehicles) validate(v, dims);
    if (x.grid < 0 || x.grid >= grid_states) throw InvalidStateError("grid state index out of range");
    if (x.demand < 0 || x.demand >= demand_states) throw InvalidStateError("demand state index out of range");
}

void check_feasible(const SystemState& x, const ActionVector& a) {
    if (a.size() != x.vehicles.size()) throw InfeasibleActionError("action length does not match charger count");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && x.vehicles[i].gamma < 1)
            throw InfeasibleActionError("charger " + std::to_string(i) + " has nothing to charge");
    }
}

ChargingCost ChargingCost::capacity(std::vector<int> capacity_by_state, Rational overload) {
    ChargingCost c;
    c.kind_ = Kind::Capacity;
    c.per_state_ = std::move(capacity_by_state);
    c.overload_ = overload;
    return c;
}

ChargingCost ChargingCost::quadratic(std::vector<int> load_by_state) {
    ChargingCost c;
    c.kind_ = Kind::Quadratic;
    c.per_state_ = std::move(load_by_state);
    return c;
}

ChargingCost ChargingCost::table(std::vector<std::vector<Rational>> by_aggregate) {
    ChargingCost c;
    c.kind_ = Kind::Table;
    c.table_ = std::move(by_aggregate);
    return c;
}

Rational ChargingCost::operator()(int aggregate, int grid_state) const {
    switch (kind_) {
        case Kind::Capacity:
            return aggregate <= per_state_.at(static_cast<std::size_t>(grid_state)) ? Rational{0} : overload_;
        case Kind::Quadratic: {
            const std::int64_t load = aggregate + per_state_.at(static_cast<std::size_t>(grid_state));
            return Rational{load * load};
        }
        case Kind::Table:
            return table_.at(static_cast<std::size_t>(aggregate)).at(static_cast<std::size_t>(grid_state));
    }
    return Rational{0};
}

StageCost stage_cost_parts(const SystemState& x, const ActionVector& a, const ChargingCost& cost,
                           const PenaltyFunction& penalty) {
    check_feasible(x, a);
    StageCost out;
    out.charging = cost(a.aggregate(), x.grid);
    for (std::size_t i = 0; i < x.vehicles.size(); ++i) {
        const auto& v = x.vehicles[i];
        if (v.departing()) out.penalty += penalty(v.gamma - (a[i] ? 1 : 0));
    }
    return out;
}

std::vector<VehicleState> step_vehicles(const SystemState& x, const ActionVector& a) {
    check_feasible(x, a);
    std::vector<VehicleState> next = x.vehicles;
    for (std::size_t i = 0; i < next.size(); ++i) {
        auto& v = next[i];
        if (!v.present()) continue;
        v.lambda -= 1;
        v.gamma -= a[i] ? 1 : 0;
        if (v.lambda == 0) v = kEmptyCharger;
    }
    return next;
}

}  // namespace evsched
