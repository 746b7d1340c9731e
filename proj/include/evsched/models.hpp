#pragma once

#include "evsched/core.hpp"
#include "evsched/random.hpp"
#include "evsched/rational.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evsched {

class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Finite probability mass function with exact weights. Sampling is by
/// inverse CDF from a single uniform variate.
class Distribution {
public:
    Distribution() = default;

    /// Weights must be non-negative and sum to 1. A sum within `tolerance`
    /// of 1 (decimal input) is accepted and the last positive weight absorbs
    /// the residue so the stored row sums to exactly 1.
    static Distribution from_probabilities(std::vector<Rational> probabilities, double tolerance = 1e-12);
    static Distribution point(std::size_t size, std::size_t index);
    static Distribution uniform(std::size_t size);

    [[nodiscard]] std::size_t size() const { return probabilities_.size(); }
    [[nodiscard]] std::span<const Rational> probabilities() const { return probabilities_; }
    [[nodiscard]] const Rational& probability(std::size_t index) const { return probabilities_.at(index); }
    [[nodiscard]] int sample(double u) const;

private:
    std::vector<Rational> probabilities_;
    std::vector<double> cumulative_;
};

/// Grid state process: integer label per state (capacity or base load), a
/// transition kernel P(s' | s, A) and the charging cost C(A, s).
class GridModel {
public:
    enum class TransitionKind { Iid, Markov, ActionDependent };

    GridModel() = default;
    static GridModel iid(std::vector<int> values, Distribution next, ChargingCost cost);
    static GridModel markov(std::vector<int> values, std::vector<Distribution> rows, ChargingCost cost);
    /// rows_by_aggregate[A][s] is P(. | s, A) for A = 0..N.
    static GridModel action_dependent(std::vector<int> values, std::vector<std::vector<Distribution>> rows_by_aggregate,
                                      ChargingCost cost);

    [[nodiscard]] int state_count() const { return static_cast<int>(values_.size()); }
    [[nodiscard]] int value(int s) const { return values_.at(static_cast<std::size_t>(s)); }
    [[nodiscard]] std::span<const int> values() const { return values_; }
    [[nodiscard]] TransitionKind transition_kind() const { return kind_; }
    [[nodiscard]] const Distribution& transition(int s, int aggregate) const;
    /// Consumes exactly one uniform from `stream`.
    [[nodiscard]] int sample(int s, int aggregate, RandomStream& stream) const;
    [[nodiscard]] Rational cost(int aggregate, int s) const { return cost_(aggregate, s); }
    [[nodiscard]] const ChargingCost& cost_function() const { return cost_; }
    [[nodiscard]] const Distribution& initial() const { return initial_; }
    void set_initial(Distribution initial);

    /// Throws ModelError if the kernel shape does not fit `chargers`.
    void validate(int chargers) const;

private:
    TransitionKind kind_ = TransitionKind::Iid;
    std::vector<int> values_;
    std::vector<std::vector<Distribution>> rows_;  // [A][s], [0][s] or [0][0] depending on kind_
    ChargingCost cost_;
    Distribution initial_;
};

/// Arrivals announced by one demand state: count and i.i.d. initial states.
struct ArrivalLaw {
    Distribution count;
    std::vector<VehicleState> marks;
    Distribution mark_probabilities;

    static ArrivalLaw none();
    static ArrivalLaw fixed_count(int count, std::vector<VehicleState> marks, Distribution mark_probabilities);
    /// Stay uniform on 1..max_stay, request uniform on 1..stay, `count`
    /// arrivals per stage.
    static ArrivalLaw uniform_stay_request(int count, int max_stay);

    [[nodiscard]] Rational zero_arrival_probability() const;
    [[nodiscard]] int max_count() const { return static_cast<int>(count.size()) - 1; }
};

struct DemandDraw {
    int next = 0;
    std::vector<VehicleState> arrivals;
};

/// Exogenous demand chain. The law of arrivals at t+1 is that of d_t.
class DemandModel {
public:
    DemandModel() = default;
    DemandModel(std::vector<Distribution> kernel, std::vector<ArrivalLaw> laws);
    static DemandModel single(ArrivalLaw law);

    [[nodiscard]] int state_count() const { return static_cast<int>(kernel_.size()); }
    [[nodiscard]] const Distribution& transition(int d) const { return kernel_.at(static_cast<std::size_t>(d)); }
    [[nodiscard]] const ArrivalLaw& law(int d) const { return laws_.at(static_cast<std::size_t>(d)); }
    [[nodiscard]] const Distribution& initial() const { return initial_; }
    void set_initial(Distribution initial);

    /// One uniform from `transition` for d'; one for the count and one per
    /// arrival from `marks`.
    [[nodiscard]] DemandDraw sample(int d, RandomStream& transition, RandomStream& marks) const;
    void sample_into(int d, RandomStream& transition, RandomStream& marks, DemandDraw& out) const;

    [[nodiscard]] bool irreducible() const;
    void validate(const Dimensions& dims) const;

private:
    std::vector<Distribution> kernel_;
    std::vector<ArrivalLaw> laws_;
    Distribution initial_;
};

struct AdmitResult {
    std::vector<VehicleState> vehicles;
    int rejected = 0;
};

/// Places arrivals in the lowest-index empty chargers in arrival order;
/// arrivals beyond the free capacity are dropped and counted.
[[nodiscard]] AdmitResult admit(std::vector<VehicleState> vehicles, std::span<const VehicleState> arrivals);
int admit_in_place(std::vector<VehicleState>& vehicles, std::span<const VehicleState> arrivals);

enum class AdmissionRule { LowestIndex };

/// How many vehicles the priority heuristics charge: min(capacity, V(x))
/// with capacity taken from the grid state label, a constant, or unbounded.
struct BudgetSpec {
    enum class Kind { GridCapacity, Constant, Unlimited };
    Kind kind = Kind::GridCapacity;
    int constant = 0;
};

enum class PenaltyKind { Linear, Quadratic };

[[nodiscard]] std::string to_string(PenaltyKind kind);
[[nodiscard]] PenaltyKind parse_penalty_kind(std::string_view name);
[[nodiscard]] PenaltyFunction make_penalty(PenaltyKind kind, int max_request);

struct ScenarioModel {
    std::string name = "scenario";
    Dimensions dims;
    GridModel grid;
    DemandModel demand;
    PenaltyFunction penalty;
    AdmissionRule admission = AdmissionRule::LowestIndex;
    BudgetSpec budget;

    /// Cross-field consistency; throws ModelError.
    void validate() const;
    [[nodiscard]] SystemState empty_state(int grid_state = 0, int demand_state = 0) const;
};

/// The capacity-limited benchmark: N=400, B=E=10, grid capacity i.i.d.
/// uniform on 40..160, overload cost N q(E), `arrival_rate` arrivals per
/// stage with uniform stay and uniform request up to the stay.
[[nodiscard]] ScenarioModel scenario_sec5(int arrival_rate, PenaltyKind penalty = PenaltyKind::Linear);

struct StageResult {
    StageCost cost;
    int aggregate = 0;
    int rejected = 0;
};

/// One stage boundary: stage cost of (x_t, a_t), vehicle update and
/// departures, demand transition and arrivals for t+1, then the grid
/// transition given A_t. Each source draws from its own (seed, stage) stream.
StageResult advance_stage(const ScenarioModel& model, SystemState& x, const ActionVector& a, std::uint64_t seed,
                          std::int64_t stage);

/// All chargers empty; grid and demand drawn from their initial laws.
[[nodiscard]] SystemState initial_state(const ScenarioModel& model, std::uint64_t seed);

}  // namespace evsched
