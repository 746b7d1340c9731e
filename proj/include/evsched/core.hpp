#pragma once

#include "evsched/rational.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsched {

class InvalidStateError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InfeasibleActionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Scenario constants: charger count N, longest stay B, largest request E.
struct Dimensions {
    int chargers = 0;
    int max_stay = 0;
    int max_request = 0;

    friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

/// State of one charger: stages left until departure and charge units still
/// requested. (0,0) is the empty charger.
struct VehicleState {
    int lambda = 0;
    int gamma = 0;

    [[nodiscard]] constexpr bool present() const { return lambda >= 1; }
    [[nodiscard]] constexpr bool chargeable() const { return lambda >= 1 && gamma >= 1; }
    [[nodiscard]] constexpr bool departing() const { return lambda == 1; }

    friend constexpr bool operator==(const VehicleState&, const VehicleState&) = default;
};

inline constexpr VehicleState kEmptyCharger{};

/// Throws InvalidStateError unless 0 <= lambda <= B, 0 <= gamma <= E and
/// lambda == 0 implies gamma == 0.
void validate(const VehicleState& v, const Dimensions& dims);

/// Slack before a vehicle must be charged without interruption:
/// lambda - gamma, or B once the request is met.
[[nodiscard]] constexpr int laxity(const VehicleState& v, int max_stay) {
    return v.gamma > 0 ? v.lambda - v.gamma : max_stay;
}

enum class PriorityOrdering { JOverI, IOverJ, Equal, Incomparable };

[[nodiscard]] std::string to_string(PriorityOrdering ordering);

/// j has priority over i when it has no more laxity and no less remaining
/// processing, with at least one of the two strict. Both vehicles must be
/// present; throws InvalidStateError for an empty charger.
[[nodiscard]] PriorityOrdering compare_priority(const VehicleState& vi, const VehicleState& vj, int max_stay);

/// Shorthand for compare_priority(vi, vj) == JOverI without the presence check.
[[nodiscard]] constexpr bool has_priority_over(const VehicleState& vj, const VehicleState& vi, int max_stay) {
    const int ti = laxity(vi, max_stay);
    const int tj = laxity(vj, max_stay);
    return ti >= tj && vi.gamma <= vj.gamma && (ti > tj || vi.gamma < vj.gamma);
}

/// Non-completion penalty q(0..E), tabulated exactly.
class PenaltyFunction {
public:
    PenaltyFunction() = default;

    /// Rejects tables with q(0) != 0 or increments that are negative or
    /// decreasing (std::invalid_argument).
    static PenaltyFunction from_table(std::vector<Rational> values, std::string name = "custom");
    /// Same table without the convexity check. Only for negative controls.
    static PenaltyFunction from_table_unchecked(std::vector<Rational> values, std::string name = "custom");
    static PenaltyFunction linear(int max_request);
    static PenaltyFunction quadratic(int max_request);

    [[nodiscard]] const Rational& operator()(int units) const;
    [[nodiscard]] int max_units() const { return static_cast<int>(values_.size()) - 1; }
    [[nodiscard]] std::span<const Rational> table() const { return values_; }
    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] bool has_convex_increments() const;

private:
    std::vector<Rational> values_{Rational{0}};
    std::string name_ = "zero";
};

/// Binary charge decision per charger plus the number of chargers charged.
class ActionVector {
public:
    ActionVector() = default;
    explicit ActionVector(std::size_t chargers) : bits_(chargers, 0) {}
    static ActionVector from_bits(std::vector<std::uint8_t> bits);

    void set(std::size_t charger, bool charge);
    [[nodiscard]] bool operator[](std::size_t charger) const { return bits_[charger] != 0; }
    [[nodiscard]] std::size_t size() const { return bits_.size(); }
    [[nodiscard]] int aggregate() const { return aggregate_; }
    [[nodiscard]] std::span<const std::uint8_t> bits() const { return bits_; }

    friend bool operator==(const ActionVector&, const ActionVector&) = default;

private:
    std::vector<std::uint8_t> bits_;
    int aggregate_ = 0;
};

struct SystemState {
    std::vector<VehicleState> vehicles;
    int grid = 0;
    int demand = 0;

    [[nodiscard]] std::size_t chargers() const { return vehicles.size(); }
    friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// Number of connected vehicles that still need charge, V(x).
[[nodiscard]] int unfinished_count(const SystemState& x);

void validate(const SystemState& x, const Dimensions& dims, int grid_states, int demand_states);

/// Throws InfeasibleActionError if a charges an empty or finished charger or
/// has the wrong length.
void check_feasible(const SystemState& x, const ActionVector& a);

/// Charging cost C(A, s) as a function of aggregate action and grid state.
class ChargingCost {
public:
    enum class Kind { Capacity, Quadratic, Table };

    ChargingCost() = default;
    /// C(A,s) = 0 if A <= capacity[s], otherwise `overload`.
    static ChargingCost capacity(std::vector<int> capacity_by_state, Rational overload);
    /// C(A,s) = (A + load[s])^2.
    static ChargingCost quadratic(std::vector<int> load_by_state);
    /// C(A,s) = table[A][s].
    static ChargingCost table(std::vector<std::vector<Rational>> by_aggregate);

    [[nodiscard]] Rational operator()(int aggregate, int grid_state) const;
    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] const Rational& overload() const { return overload_; }
    /// Capacity or load per grid state (Capacity, Quadratic).
    [[nodiscard]] const std::vector<int>& per_state() const { return per_state_; }
    [[nodiscard]] const std::vector<std::vector<Rational>>& cost_table() const { return table_; }

private:
    Kind kind_ = Kind::Table;
    std::vector<int> per_state_;
    Rational overload_;
    std::vector<std::vector<Rational>> table_;
};

struct StageCost {
    Rational charging;
    Rational penalty;

    [[nodiscard]] Rational total() const { return charging + penalty; }
};

/// C(A, s) plus q(gamma - a) summed over vehicles with lambda == 1.
[[nodiscard]] StageCost stage_cost_parts(const SystemState& x, const ActionVector& a, const ChargingCost& cost,
                                         const PenaltyFunction& penalty);

[[nodiscard]] inline Rational stage_cost(const SystemState& x, const ActionVector& a, const ChargingCost& cost,
                                         const PenaltyFunction& penalty) {
    return stage_cost_parts(x, a, cost, penalty).total();
}

/// Applies (lambda, gamma) -> (lambda - 1, gamma - a); vehicles reaching
/// lambda == 0 leave and their charger becomes (0,0).
[[nodiscard]] std::vector<VehicleState> step_vehicles(const SystemState& x, const ActionVector& a);

}  // namespace evsched
