#pragma once

#include "evsched/core.hpp"
#include "evsched/models.hpp"
#include "evsched/policies.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evsched {

/// First (i, j), in lexicographic order, such that the policy's decision at
/// x charges i, idles j, and j has priority over i. The policy is cloned, so
/// a stateful policy is not advanced.
[[nodiscard]] std::optional<ChargerPair> find_violation(const Policy& policy, const SystemState& x, int max_stay);

enum class WindowPhase { Swapped, Restored, Closed };

[[nodiscard]] std::string to_string(WindowPhase phase);

/// Bookkeeping for one interchange: the swapped pair, the stage t0 of the
/// swap, W = max(lambda_i, lambda_j) - 1 at t0, and the stage w at which the
/// base policy first charged j but not i (the swap-back), if any.
struct InterchangeWindow {
    ChargerPair pair;
    std::int64_t t0 = 0;
    int span = 0;
    std::optional<std::int64_t> swap_back;
    WindowPhase phase = WindowPhase::Swapped;

    [[nodiscard]] std::int64_t last_stage() const { return t0 + span; }
};

/// Wraps a base policy pi into its interchanging policy: at t0 it charges j
/// instead of i; afterwards it feeds pi the trajectory pi itself would have
/// produced (the shadow state, which differs only at chargers i and j) and
/// copies pi's decisions, except that at the first stage where pi charges j
/// but not i while both are connected it charges i instead of j. From then
/// on, and after t0 + W, it is pi.
///
/// Must be driven stage by stage starting at x_t0.
class InterchangePolicy final : public Policy {
public:
    InterchangePolicy(std::unique_ptr<Policy> base, SystemState x_t0, std::int64_t t0, ChargerPair pair, int max_stay);
    InterchangePolicy(const InterchangePolicy& other);

    ActionVector decide(const SystemState& x) override;
    [[nodiscard]] std::unique_ptr<Policy> clone() const override { return std::make_unique<InterchangePolicy>(*this); }
    [[nodiscard]] std::string name() const override { return "interchange(" + base_->name() + ")"; }

    [[nodiscard]] const InterchangeWindow& window() const { return window_; }
    [[nodiscard]] std::int64_t next_stage() const { return next_stage_; }

private:
    std::unique_ptr<Policy> base_;
    SystemState start_;
    InterchangeWindow window_;
    int max_stay_;
    std::int64_t next_stage_;
    VehicleState shadow_i_;
    VehicleState shadow_j_;
};

/// Throws std::invalid_argument unless (i, j) is a violation of `base` at x_t0.
[[nodiscard]] std::unique_ptr<InterchangePolicy> wrap_interchange(const Policy& base, const SystemState& x_t0,
                                                                  std::int64_t t0, ChargerPair pair, int max_stay);

/// Units still unmet when each tracked vehicle left; -1 while still connected.
struct ShortfallPair {
    int i = -1;
    int j = -1;
};

struct CoupledTrace {
    Rational cost_first;
    Rational cost_second;
    std::vector<Rational> stage_costs_first;
    std::vector<Rational> stage_costs_second;
    std::vector<int> aggregates;
    std::vector<int> grid_path;
    std::vector<int> demand_path;
};

/// Runs two policies from the same state over the same random streams for
/// stages t0..t0+horizon. Throws std::logic_error if the aggregate actions
/// or the exogenous grid/demand paths ever differ.
[[nodiscard]] CoupledTrace run_coupled(const ScenarioModel& model, Policy& first, Policy& second, const SystemState& x_t0,
                                       std::int64_t t0, int horizon, std::uint64_t seed);

struct CoupledRollout {
    CoupledTrace trace;
    InterchangeWindow window;
    ShortfallPair base_shortfall;
    ShortfallPair interchange_shortfall;

    [[nodiscard]] const Rational& cost_base() const { return trace.cost_first; }
    [[nodiscard]] const Rational& cost_interchange() const { return trace.cost_second; }
    [[nodiscard]] bool swap_back_empty() const { return !window.swap_back.has_value(); }
};

/// pi against its interchanging policy for (i, j) at x_t0. `horizon` must be
/// at least W.
[[nodiscard]] CoupledRollout coupled_rollout(const ScenarioModel& model, const Policy& base, const SystemState& x_t0,
                                             std::int64_t t0, ChargerPair pair, int horizon, std::uint64_t seed);

/// Everything needed to replay one certification case.
struct ReproductionBundle {
    std::string policy;
    std::uint64_t seed = 0;
    std::int64_t stage = 0;
    SystemState state;
    ChargerPair pair;
    int span = 0;
    std::optional<std::int64_t> swap_back;
    int horizon = 0;
    Rational cost_base;
    Rational cost_interchange;
    std::string reason;
};

struct DominanceReport {
    std::string policy;
    std::string penalty;
    bool penalty_convex = true;
    std::size_t cases = 0;
    std::size_t strict = 0;
    std::size_t equal = 0;
    std::size_t counterexamples = 0;
    std::size_t swap_back_empty = 0;
    std::size_t swap_back_found = 0;
    std::size_t shortfall_identity_failures = 0;
    std::size_t equal_total_failures = 0;
    std::size_t unsampled = 0;  ///< cases for which no violation state was found
    std::vector<ReproductionBundle> failures;  ///< first few of any kind

    [[nodiscard]] bool passed() const {
        return counterexamples == 0 && shortfall_identity_failures == 0 && equal_total_failures == 0 && unsampled == 0;
    }
};

struct CertifyOptions {
    std::size_t cases = 1000;
    std::uint64_t seed = 1;
    /// Stages simulated from an empty system looking for a violation.
    int search_stages = 400;
    /// Violations before this stage are skipped; drawn per case from 0..burn_in.
    int burn_in = 40;
    /// Extra stages simulated past t0 + W.
    int extra_horizon = 2;
    int threads = 1;
    std::size_t max_recorded_failures = 16;
};

/// Samples reachable violation states by rolling the scenario forward under
/// `policy`, builds the interchanging policy at each, and compares realised
/// costs exactly on the shared sample path.
[[nodiscard]] DominanceReport certify_dominance(const ScenarioModel& model, const Policy& policy,
                                                const CertifyOptions& options);

/// Two chargers, no arrivals, grid capacity i.i.d. uniform on {0, 1, 2}.
[[nodiscard]] ScenarioModel two_vehicle_scenario(PenaltyFunction penalty, int max_stay, int max_request);

/// Same comparison over random two-vehicle start states, each a violation
/// of the policy built from `rule`.
[[nodiscard]] DominanceReport certify_two_vehicle(const PenaltyFunction& penalty, PriorityRule rule, std::size_t instances,
                                                  std::uint64_t seed, int max_stay, int max_request);

}  // namespace evsched
