#include "evsched/interchange.hpp"

#include "evsched/parallel.hpp"

#include <algorithm>
#include <stdexcept>

namespace evsched {
namespace {

VehicleState step_one(VehicleState v, bool charged) {
    if (!v.present()) return v;
    v.lambda -= 1;
    v.gamma -= charged ? 1 : 0;
    if (v.lambda == 0) v = kEmptyCharger;
    return v;
}

}  // namespace

std::optional<ChargerPair> find_violation(const Policy& policy, const SystemState& x, int max_stay) {
    auto probe = policy.clone();
    return check_lllp_compliance(x, probe->decide(x), max_stay);
}

std::string to_string(WindowPhase phase) {
    switch (phase) {
        case WindowPhase::Swapped: return "swapped";
        case WindowPhase::Restored: return "restored";
        case WindowPhase::Closed: return "closed";
    }
    return "unknown";
}

InterchangePolicy::InterchangePolicy(std::unique_ptr<Policy> base, SystemState x_t0, std::int64_t t0, ChargerPair pair,
                                     int max_stay)
    : base_(std::move(base)), start_(std::move(x_t0)), max_stay_(max_stay), next_stage_(t0) {
    const auto n = static_cast<int>(start_.vehicles.size());
    if (pair.i < 0 || pair.j < 0 || pair.i >= n || pair.j >= n || pair.i == pair.j)
        throw std::invalid_argument("interchange pair out of range");
    const auto& vi = start_.vehicles[static_cast<std::size_t>(pair.i)];
    const auto& vj = start_.vehicles[static_cast<std::size_t>(pair.j)];
    if (!vi.present() || !vj.present() || !has_priority_over(vj, vi, max_stay))
        throw std::invalid_argument("interchange requires j to have priority over i at x_t0");
    window_.pair = pair;
    window_.t0 = t0;
    window_.span = std::max(vi.lambda, vj.lambda) - 1;
}

InterchangePolicy::InterchangePolicy(const InterchangePolicy& other)
    : Policy(other),
      base_(other.base_->clone()),
      start_(other.start_),
      window_(other.window_),
      max_stay_(other.max_stay_),
      next_stage_(other.next_stage_),
      shadow_i_(other.shadow_i_),
      shadow_j_(other.shadow_j_) {}

ActionVector InterchangePolicy::decide(const SystemState& x) {
    const std::int64_t k = next_stage_++;
    const auto i = static_cast<std::size_t>(window_.pair.i);
    const auto j = static_cast<std::size_t>(window_.pair.j);

    if (k == window_.t0) {
        if (x != start_) throw std::logic_error("interchange policy must start at its recorded state");
        ActionVector a = base_->decide(x);
        if (!a[i] || a[j]) throw std::invalid_argument("base policy does not charge i and idle j at x_t0");
        shadow_i_ = step_one(x.vehicles[i], true);
        shadow_j_ = step_one(x.vehicles[j], false);
        a.set(i, false);
        a.set(j, true);
        if (window_.span == 0) window_.phase = WindowPhase::Closed;
        return a;
    }

    if (window_.phase != WindowPhase::Swapped || k > window_.last_stage()) {
        if (k > window_.last_stage()) window_.phase = WindowPhase::Closed;
        return base_->decide(x);
    }

    // Reconstruct the state the base policy would be in: identical except
    // that i holds one more unit and j one less than under the swap.
    SystemState shadow = x;
    if (shadow_i_.present()) {
        if (x.vehicles[i].lambda != shadow_i_.lambda || x.vehicles[i].gamma != shadow_i_.gamma + 1)
            throw std::logic_error("interchange: charger i drifted from its shadow");
        shadow.vehicles[i] = shadow_i_;
    }
    if (shadow_j_.present()) {
        if (x.vehicles[j].lambda != shadow_j_.lambda || x.vehicles[j].gamma != shadow_j_.gamma - 1)
            throw std::logic_error("interchange: charger j drifted from its shadow");
        shadow.vehicles[j] = shadow_j_;
    }

    ActionVector base_action = base_->decide(shadow);
    ActionVector out = base_action;
    const bool both_connected = shadow_i_.present() && shadow_j_.present();
    if (both_connected && base_action[j] && !base_action[i]) {
        out.set(i, true);
        out.set(j, false);
        window_.swap_back = k;
        window_.phase = WindowPhase::Restored;
    } else if (shadow_j_.present() && base_action[j] && x.vehicles[j].gamma < 1) {
        throw std::logic_error("interchange: mirrored charge of j is infeasible");
    }
    shadow_i_ = step_one(shadow_i_, base_action[i] && shadow_i_.present());
    shadow_j_ = step_one(shadow_j_, base_action[j] && shadow_j_.present());
    if (k == window_.last_stage() && window_.phase == WindowPhase::Swapped) window_.phase = WindowPhase::Closed;
    return out;
}

std::unique_ptr<InterchangePolicy> wrap_interchange(const Policy& base, const SystemState& x_t0, std::int64_t t0,
                                                    ChargerPair pair, int max_stay) {
    auto probe = base.clone();
    const ActionVector a = probe->decide(x_t0);
    const auto i = static_cast<std::size_t>(pair.i);
    const auto j = static_cast<std::size_t>(pair.j);
    if (i >= a.size() || j >= a.size() || !a[i] || a[j] ||
        !has_priority_over(x_t0.vehicles[j], x_t0.vehicles[i], max_stay))
        throw std::invalid_argument("wrap_interchange: (i, j) is not a violation of the base policy at x_t0");
    return std::make_unique<InterchangePolicy>(base.clone(), x_t0, t0, pair, max_stay);
}

CoupledTrace run_coupled(const ScenarioModel& model, Policy& first, Policy& second, const SystemState& x_t0,
                         std::int64_t t0, int horizon, std::uint64_t seed) {
    CoupledTrace trace;
    SystemState xa = x_t0;
    SystemState xb = x_t0;
    for (std::int64_t k = t0; k <= t0 + horizon; ++k) {
        const ActionVector a = first.decide(xa);
        const ActionVector b = second.decide(xb);
        if (a.aggregate() != b.aggregate())
            throw std::logic_error("coupled rollout: aggregate actions differ at stage " + std::to_string(k));
        const StageResult ra = advance_stage(model, xa, a, seed, k);
        const StageResult rb = advance_stage(model, xb, b, seed, k);
        if (xa.grid != xb.grid || xa.demand != xb.demand)
            throw std::logic_error("coupled rollout: exogenous paths diverged at stage " + std::to_string(k));
        trace.stage_costs_first.push_back(ra.cost.total());
        trace.stage_costs_second.push_back(rb.cost.total());
        trace.cost_first += trace.stage_costs_first.back();
        trace.cost_second += trace.stage_costs_second.back();
        trace.aggregates.push_back(a.aggregate());
        trace.grid_path.push_back(xa.grid);
        trace.demand_path.push_back(xa.demand);
    }
    return trace;
}

namespace {

// Shortfall of the vehicle at `charger`, recorded at its departure stage.
class ShortfallTracker final : public Policy {
public:
    ShortfallTracker(Policy& inner, const SystemState& x_t0, ChargerPair pair)
        : inner_(inner), pair_(pair), left_i_(x_t0.vehicles[static_cast<std::size_t>(pair.i)].lambda),
          left_j_(x_t0.vehicles[static_cast<std::size_t>(pair.j)].lambda) {}

    ActionVector decide(const SystemState& x) override {
        ActionVector a = inner_.decide(x);
        record(x, a, static_cast<std::size_t>(pair_.i), left_i_, shortfall.i);
        record(x, a, static_cast<std::size_t>(pair_.j), left_j_, shortfall.j);
        return a;
    }
    [[nodiscard]] std::unique_ptr<Policy> clone() const override {
        throw std::logic_error("ShortfallTracker is not clonable");
    }
    [[nodiscard]] std::string name() const override { return inner_.name(); }

    ShortfallPair shortfall;

private:
    static void record(const SystemState& x, const ActionVector& a, std::size_t charger, int& left, int& out) {
        if (left <= 0) return;
        if (left == 1) out = x.vehicles[charger].gamma - (a[charger] ? 1 : 0);
        --left;
    }

    Policy& inner_;
    ChargerPair pair_;
    int left_i_;
    int left_j_;
};

}  // namespace

CoupledRollout coupled_rollout(const ScenarioModel& model, const Policy& base, const SystemState& x_t0, std::int64_t t0,
                               ChargerPair pair, int horizon, std::uint64_t seed) {
    auto interchange = wrap_interchange(base, x_t0, t0, pair, model.dims.max_stay);
    if (horizon < interchange->window().span)
        throw std::invalid_argument("coupled rollout horizon must be at least max(lambda_i, lambda_j) - 1");
    auto base_run = base.clone();
    ShortfallTracker first(*base_run, x_t0, pair);
    ShortfallTracker second(*interchange, x_t0, pair);
    CoupledRollout out;
    out.trace = run_coupled(model, first, second, x_t0, t0, horizon, seed);
    out.window = interchange->window();
    out.base_shortfall = first.shortfall;
    out.interchange_shortfall = second.shortfall;
    return out;
}

namespace {

struct CaseOutcome {
    bool sampled = false;
    ReproductionBundle bundle;
    bool swap_back_empty = false;
    int comparison = 0;  // -1 strict improvement, 0 equal, +1 counterexample
    bool shortfall_ok = true;
    bool equal_total_ok = true;
};

CaseOutcome evaluate_case(const ScenarioModel& model, const Policy& policy, const SystemState& x, std::int64_t stage,
                          ChargerPair pair, std::uint64_t seed, int extra_horizon) {
    CaseOutcome out;
    out.sampled = true;
    const int span = std::max(x.vehicles[static_cast<std::size_t>(pair.i)].lambda,
                              x.vehicles[static_cast<std::size_t>(pair.j)].lambda) - 1;
    const int horizon = span + extra_horizon;
    const CoupledRollout r = coupled_rollout(model, policy, x, stage, pair, horizon, seed);
    out.bundle = {policy.name(), seed, stage, x, pair, span, r.window.swap_back, horizon, r.cost_base(),
                  r.cost_interchange(), ""};
    out.comparison = r.cost_interchange() < r.cost_base() ? -1 : (r.cost_interchange() == r.cost_base() ? 0 : 1);
    out.swap_back_empty = r.swap_back_empty();
    if (out.swap_back_empty) {
        const auto& p = r.base_shortfall;
        const auto& q = r.interchange_shortfall;
        out.shortfall_ok = p.i >= 0 && p.i < p.j && q.j == p.j - 1 && q.i == p.i + 1;
    } else {
        out.equal_total_ok = r.cost_interchange() == r.cost_base();
    }
    if (out.comparison > 0) out.bundle.reason = "counterexample";
    else if (!out.shortfall_ok) out.bundle.reason = "shortfall identity";
    else if (!out.equal_total_ok) out.bundle.reason = "unequal totals with swap-back";
    return out;
}

DominanceReport aggregate(const std::vector<CaseOutcome>& outcomes, std::string policy, const PenaltyFunction& penalty,
                          std::size_t max_failures) {
    DominanceReport report;
    report.policy = std::move(policy);
    report.penalty = penalty.name();
    report.penalty_convex = penalty.has_convex_increments();
    for (const auto& o : outcomes) {
        if (!o.sampled) {
            ++report.unsampled;
            continue;
        }
        ++report.cases;
        if (o.comparison < 0) ++report.strict;
        else if (o.comparison == 0) ++report.equal;
        else ++report.counterexamples;
        if (o.swap_back_empty) ++report.swap_back_empty;
        else ++report.swap_back_found;
        if (!o.shortfall_ok) ++report.shortfall_identity_failures;
        if (!o.equal_total_ok) ++report.equal_total_failures;
        if (!o.bundle.reason.empty() && report.failures.size() < max_failures) report.failures.push_back(o.bundle);
    }
    return report;
}

}  // namespace

DominanceReport certify_dominance(const ScenarioModel& model, const Policy& policy, const CertifyOptions& options) {
    std::vector<CaseOutcome> outcomes(options.cases);
    parallel_for(options.cases, options.threads, [&](std::size_t c) {
        const std::uint64_t case_seed = mix_seed(options.seed, c);
        RandomStream picker(case_seed, 0, StreamSource::Sampling);
        const int first_stage = static_cast<int>(picker.uniform_int(0, std::max(options.burn_in, 0)));
        SystemState x = initial_state(model, case_seed);
        auto scan = policy.clone();
        for (std::int64_t k = 0; k < options.search_stages; ++k) {
            auto before = scan->clone();
            const ActionVector a = scan->decide(x);
            if (k >= first_stage) {
                if (const auto pair = check_lllp_compliance(x, a, model.dims.max_stay)) {
                    outcomes[c] = evaluate_case(model, *before, x, k, *pair, case_seed, options.extra_horizon);
                    return;
                }
            }
            (void)advance_stage(model, x, a, case_seed, k);
        }
    });
    return aggregate(outcomes, policy.name(), model.penalty, options.max_recorded_failures);
}

ScenarioModel two_vehicle_scenario(PenaltyFunction penalty, int max_stay, int max_request) {
    ScenarioModel m;
    m.name = "two-vehicle";
    m.dims = {2, max_stay, max_request};
    const Rational overload = Rational{2} * penalty(max_request);
    m.penalty = std::move(penalty);
    const std::vector<int> capacities{0, 1, 2};
    m.grid = GridModel::iid(capacities, Distribution::uniform(capacities.size()),
                            ChargingCost::capacity(capacities, overload));
    m.demand = DemandModel::single(ArrivalLaw::none());
    m.budget = {BudgetSpec::Kind::GridCapacity, 0};
    return m;
}

DominanceReport certify_two_vehicle(const PenaltyFunction& penalty, PriorityRule rule, std::size_t instances,
                                    std::uint64_t seed, int max_stay, int max_request) {
    const ScenarioModel model = two_vehicle_scenario(penalty, max_stay, max_request);
    const PriorityPolicy policy(rule, ChargeBudgetRule::from_spec(model.budget, model.grid));
    std::vector<CaseOutcome> outcomes(instances);
    for (std::size_t c = 0; c < instances; ++c) {
        const std::uint64_t case_seed = mix_seed(seed, c);
        RandomStream picker(case_seed, 0, StreamSource::Sampling);
        // Rejection-sample a start state at which the policy violates the
        // priority order; capacity 1 forces a choice between the two.
        for (int attempt = 0; attempt < 1000; ++attempt) {
            SystemState x = model.empty_state(1, 0);
            for (auto& v : x.vehicles) {
                v.lambda = static_cast<int>(picker.uniform_int(1, max_stay));
                v.gamma = static_cast<int>(picker.uniform_int(1, max_request));
            }
            if (const auto pair = find_violation(policy, x, max_stay)) {
                outcomes[c] = evaluate_case(model, policy, x, 0, *pair, case_seed, 1);
                break;
            }
        }
    }
    return aggregate(outcomes, policy.name(), penalty, 16);
}

}  // namespace evsched
