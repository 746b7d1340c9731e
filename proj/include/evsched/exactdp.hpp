#pragma once

#include "evsched/core.hpp"
#include "evsched/models.hpp"
#include "evsched/policies.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsched {

/// The lattice for the requested dimensions has more states than allowed.
class StateSpaceTooLarge : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Structural findings on the conditions that make the gain constant:
/// positive zero-arrival probability, a grid state reachable from every grid
/// state under A = 0, and an irreducible demand chain.
struct Assumption2Report {
    bool zero_arrival = false;
    Rational min_zero_arrival_probability;
    bool special_grid_reachable = false;
    int special_grid_state = 0;
    bool demand_irreducible = false;

    [[nodiscard]] bool holds() const { return zero_arrival && special_grid_reachable && demand_irreducible; }
    [[nodiscard]] std::vector<std::string> findings() const;
};

[[nodiscard]] Assumption2Report check_assumption2(const ScenarioModel& model);

struct EnumerationOptions {
    std::size_t max_states = 2'000'000;
    /// Throw ModelError instead of recording findings when the conditions fail.
    bool require_assumption2 = false;
};

/// Number of lattice states: (1 + B(E+1))^N |S| |D|.
[[nodiscard]] std::size_t lattice_size(const Dimensions& dims, int grid_states, int demand_states);

struct Transition {
    std::uint32_t target = 0;
    Rational probability;
};

/// Every (vehicle configuration, grid state, demand state) of the lattice,
/// with exact transition rows and stage costs per feasible action. Actions
/// are bitmasks (bit k = charge charger k), listed per state in
/// lexicographic order of the bit vector (a_0, ..., a_{N-1}).
class EnumeratedMDP {
public:
    [[nodiscard]] std::size_t state_count() const { return state_count_; }
    [[nodiscard]] const Dimensions& dims() const { return dims_; }
    [[nodiscard]] int grid_states() const { return grid_states_; }
    [[nodiscard]] int demand_states() const { return demand_states_; }

    [[nodiscard]] std::uint32_t encode(const SystemState& x) const;
    [[nodiscard]] SystemState decode(std::uint32_t index) const;

    /// All chargers empty, special grid state, demand state 0.
    [[nodiscard]] std::uint32_t special_state() const { return special_; }
    [[nodiscard]] const Assumption2Report& assumption2() const { return assumption2_; }

    [[nodiscard]] std::size_t action_count(std::uint32_t x) const { return action_offset_[x + 1] - action_offset_[x]; }
    [[nodiscard]] std::uint32_t action_mask(std::uint32_t x, std::size_t k) const { return masks_[action_offset_[x] + k]; }
    /// Position of `mask` among the actions of x; throws if infeasible.
    [[nodiscard]] std::size_t action_position(std::uint32_t x, std::uint32_t mask) const;
    [[nodiscard]] ActionVector action_vector(std::uint32_t mask) const;

    [[nodiscard]] const Rational& cost(std::uint32_t x, std::size_t k) const { return cost_[action_offset_[x] + k]; }
    [[nodiscard]] double cost_value(std::uint32_t x, std::size_t k) const { return cost_d_[action_offset_[x] + k]; }
    [[nodiscard]] std::span<const Transition> transitions(std::uint32_t x, std::size_t k) const;
    [[nodiscard]] std::span<const double> transition_values(std::uint32_t x, std::size_t k) const;

    /// g(x,a) + sum_y p(y|x,a) h(y).
    [[nodiscard]] double q_value(std::uint32_t x, std::size_t k, std::span<const double> h) const;

    [[nodiscard]] std::size_t total_actions() const { return masks_.size(); }
    [[nodiscard]] std::size_t total_transitions() const { return targets_.size(); }

private:
    friend EnumeratedMDP enumerate(const ScenarioModel& model, const EnumerationOptions& options);

    Dimensions dims_;
    int grid_states_ = 0;
    int demand_states_ = 0;
    std::size_t state_count_ = 0;
    std::uint32_t radix_ = 1;
    std::uint32_t special_ = 0;
    Assumption2Report assumption2_;
    std::vector<std::size_t> action_offset_;  // per state, size state_count + 1
    std::vector<std::uint32_t> masks_;        // per (state, action)
    std::vector<Rational> cost_;
    std::vector<double> cost_d_;
    std::vector<std::size_t> row_offset_;  // per (state, action), size total_actions + 1
    std::vector<Transition> targets_;
    std::vector<double> probs_d_;
};

/// Builds the full lattice. Throws StateSpaceTooLarge past the ceiling and
/// ModelError on a row that does not sum to exactly 1.
[[nodiscard]] EnumeratedMDP enumerate(const ScenarioModel& model, const EnumerationOptions& options = {});

/// Action mask per state.
using StationaryPolicy = std::vector<std::uint32_t>;

struct DPSolution {
    double gain = 0.0;
    std::vector<double> h;
    StationaryPolicy policy;
    double residual = 0.0;
    double span = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// The damped operator tau P + (1 - tau) I was used; gain is rescaled.
    bool damped = false;
    double damping = 1.0;
    /// Filled by exact_policy_iteration: gain and h as reduced fractions.
    bool exact = false;
    std::string exact_gain;
    std::vector<std::string> exact_h;
    std::size_t exact_iterations = 0;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, DPSolution partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    [[nodiscard]] const DPSolution& partial() const { return partial_; }

private:
    DPSolution partial_;
};

struct RviOptions {
    double tol = 1e-10;
    std::size_t max_iter = 1'000'000;
    int threads = 1;
    double damping = 0.999;
    /// Iterations over which the span must shrink by 10% before RVI counts
    /// as oscillating and switches to the damped operator.
    std::size_t stall_window = 2000;
    bool allow_damping = true;
};

/// Jacobi sweeps h <- T h - (T h)(x_bar), stopped when the span of T h - h is
/// at most tol. The greedy policy takes the first minimising action in the
/// per-state action order. Throws ConvergenceError, carrying the last
/// iterate, when the span does not reach tol.
[[nodiscard]] DPSolution relative_value_iteration(const EnumeratedMDP& mdp, const RviOptions& options = {});

/// max_x |gain + h(x) - min_a Q(x, a)|.
[[nodiscard]] double bellman_residual(const EnumeratedMDP& mdp, double gain, std::span<const double> h, int threads = 1);

/// Long-run average cost of a stationary policy from every initial state,
/// computed from its recurrent classes (no unichain assumption).
struct PolicyEvaluation {
    std::vector<double> gain;
    std::size_t recurrent_classes = 0;
    double min_gain = 0.0;
    double max_gain = 0.0;
};

[[nodiscard]] PolicyEvaluation evaluate_policy(const EnumeratedMDP& mdp, const StationaryPolicy& policy);

struct GainCheck {
    double residual = 0.0;
    bool bellman_ok = false;
    double gain_spread = 0.0;
    std::size_t recurrent_classes = 0;
    bool constant_gain = false;
    bool assumption2 = false;
    std::vector<std::string> findings;

    [[nodiscard]] bool passed() const { return bellman_ok && constant_gain; }
};

[[nodiscard]] GainCheck verify_constant_gain(const EnumeratedMDP& mdp, const DPSolution& solution, double tol = 1e-10);

/// Exact gain and differential cost of a stationary policy, h(x_bar) = 0.
/// Requires a unichain policy; throws std::domain_error otherwise.
struct ExactEvaluation {
    std::string gain;
    double gain_value = 0.0;
    std::vector<std::string> h;
};

[[nodiscard]] ExactEvaluation evaluate_policy_exact(const EnumeratedMDP& mdp, const StationaryPolicy& policy);

/// Policy iteration in rational arithmetic starting from `start.policy`;
/// returns `start` with the exact fields, gain, h and policy replaced by the
/// exact optimum.
[[nodiscard]] DPSolution exact_policy_iteration(const EnumeratedMDP& mdp, DPSolution start,
                                                std::size_t max_iter = 1000);

/// Violating pairs (i, j) of the policy, summed over states.
[[nodiscard]] std::size_t count_violations(const EnumeratedMDP& mdp, const StationaryPolicy& policy);

struct SwapCheck {
    std::uint32_t state = 0;
    ChargerPair pair;
    double q_original = 0.0;
    double q_swapped = 0.0;
};

struct ProjectionResult {
    StationaryPolicy policy;
    std::size_t violations_before = 0;
    std::size_t violations_after = 0;
    std::size_t swaps = 0;
    double max_q_increase = 0.0;  ///< largest Q(swapped) - Q(original) seen
    std::vector<SwapCheck> checks;
};

/// Swaps the i/j bits at every priority violation of the solution's policy
/// until none is left, checking that each swap keeps the Bellman minimum:
/// exactly when the solution is exact, else within tol. Throws
/// std::logic_error if a swap increases Q beyond that.
[[nodiscard]] ProjectionResult lllp_projection(const EnumeratedMDP& mdp, const DPSolution& solution, double tol = 1e-10);

struct BruteForceResult {
    std::size_t policies = 0;
    double best_gain = 0.0;
    std::string exact_gain;
    StationaryPolicy best;  ///< defined on the states it reaches from x_bar, 0 elsewhere
    std::size_t exact_candidates = 0;
};

/// Every stationary deterministic policy, restricted to the states it reaches
/// from x_bar, evaluated by a linear solve. Policies within 1e-9 of the best
/// are re-evaluated exactly. Throws std::length_error past max_policies.
[[nodiscard]] BruteForceResult brute_force_min_gain(const EnumeratedMDP& mdp, std::size_t max_policies = 50'000'000);

/// Drives a stationary policy from the enumeration through decide().
class TabularPolicy final : public Policy {
public:
    TabularPolicy(const EnumeratedMDP& mdp, StationaryPolicy policy) : mdp_(&mdp), policy_(std::move(policy)) {}

    ActionVector decide(const SystemState& x) override { return mdp_->action_vector(policy_.at(mdp_->encode(x))); }
    [[nodiscard]] std::unique_ptr<Policy> clone() const override { return std::make_unique<TabularPolicy>(*this); }
    [[nodiscard]] std::string name() const override { return "tabular"; }

private:
    const EnumeratedMDP* mdp_;
    StationaryPolicy policy_;
};

}  // namespace evsched
