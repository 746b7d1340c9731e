#include "evsched/policies.hpp"

#include <algorithm>
#include <limits>

namespace evsched {
namespace {

constexpr int kKeyBias = 1 << 15;
constexpr std::uint64_t kIndexMask = (std::uint64_t{1} << 24) - 1;

// Sort key (primary, secondary, charger index) packed so that integer order
// is the rule's priority order.
std::uint64_t pack_key(int primary, int secondary, std::size_t index) {
    return (static_cast<std::uint64_t>(primary + kKeyBias) << 40) |
           (static_cast<std::uint64_t>(secondary + kKeyBias) << 24) | static_cast<std::uint64_t>(index);
}

std::uint64_t rank_key(PriorityRule rule, const VehicleState& v, std::size_t index) {
    const int theta = v.lambda - v.gamma;  // chargeable, so gamma >= 1
    switch (rule) {
        case PriorityRule::Edf: return pack_key(v.lambda, theta, index);
        case PriorityRule::Llsp: return pack_key(theta, v.gamma, index);
        case PriorityRule::Lllp: return pack_key(theta, -v.gamma, index);
    }
    return 0;
}

void collect_keys(const SystemState& x, PriorityRule rule, std::vector<std::uint64_t>& keys) {
    if (x.vehicles.size() > kIndexMask) throw std::length_error("too many chargers for priority ranking");
    keys.clear();
    for (std::size_t i = 0; i < x.vehicles.size(); ++i)
        if (x.vehicles[i].chargeable()) keys.push_back(rank_key(rule, x.vehicles[i], i));
}

}  // namespace

ChargeBudgetRule ChargeBudgetRule::grid_capacity(std::vector<int> capacity_by_grid_state) {
    ChargeBudgetRule r;
    r.kind_ = BudgetSpec::Kind::GridCapacity;
    r.capacity_ = std::move(capacity_by_grid_state);
    return r;
}

ChargeBudgetRule ChargeBudgetRule::constant(int budget) {
    if (budget < 0) throw std::invalid_argument("charge budget must be >= 0");
    ChargeBudgetRule r;
    r.kind_ = BudgetSpec::Kind::Constant;
    r.constant_ = budget;
    return r;
}

ChargeBudgetRule ChargeBudgetRule::unlimited() { return ChargeBudgetRule{}; }

ChargeBudgetRule ChargeBudgetRule::from_spec(const BudgetSpec& spec, const GridModel& grid) {
    switch (spec.kind) {
        case BudgetSpec::Kind::GridCapacity: return grid_capacity({grid.values().begin(), grid.values().end()});
        case BudgetSpec::Kind::Constant: return constant(spec.constant);
        case BudgetSpec::Kind::Unlimited: return unlimited();
    }
    return unlimited();
}

int ChargeBudgetRule::operator()(const SystemState& x) const { return limit(x, unfinished_count(x)); }

int ChargeBudgetRule::limit(const SystemState& x, int unfinished) const {
    switch (kind_) {
        case BudgetSpec::Kind::GridCapacity:
            return std::clamp(capacity_.at(static_cast<std::size_t>(x.grid)), 0, unfinished);
        case BudgetSpec::Kind::Constant: return std::min(constant_, unfinished);
        case BudgetSpec::Kind::Unlimited: return unfinished;
    }
    return unfinished;
}

std::string to_string(PriorityRule rule) {
    switch (rule) {
        case PriorityRule::Edf: return "edf";
        case PriorityRule::Llsp: return "llsp";
        case PriorityRule::Lllp: return "lllp";
    }
    return "unknown";
}

PriorityRule parse_priority_rule(std::string_view name) {
    if (name == "edf") return PriorityRule::Edf;
    if (name == "llsp") return PriorityRule::Llsp;
    if (name == "lllp") return PriorityRule::Lllp;
    throw std::invalid_argument("unknown policy '" + std::string(name) + "' (expected edf|llsp|lllp)");
}

PolicyDecision prioritize(const SystemState& x, const ChargeBudgetRule& budget, PriorityRule rule) {
    std::vector<std::uint64_t> keys;
    collect_keys(x, rule, keys);
    std::sort(keys.begin(), keys.end());
    const auto m = static_cast<std::size_t>(budget(x));
    PolicyDecision out{ActionVector(x.vehicles.size()), {}};
    out.ranking.reserve(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
        const auto index = static_cast<std::size_t>(keys[k] & kIndexMask);
        out.ranking.push_back(static_cast<int>(index));
        if (k < m) out.action.set(index, true);
    }
    return out;
}

PolicyDecision edf(const SystemState& x, const ChargeBudgetRule& budget) { return prioritize(x, budget, PriorityRule::Edf); }
PolicyDecision llsp(const SystemState& x, const ChargeBudgetRule& budget) { return prioritize(x, budget, PriorityRule::Llsp); }
PolicyDecision lllp(const SystemState& x, const ChargeBudgetRule& budget) { return prioritize(x, budget, PriorityRule::Lllp); }

std::optional<ChargerPair> check_lllp_compliance(const SystemState& x, const ActionVector& a, int max_stay) {
    const auto n = x.vehicles.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!a[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (a[j] || !x.vehicles[j].present()) continue;
            if (has_priority_over(x.vehicles[j], x.vehicles[i], max_stay))
                return ChargerPair{static_cast<int>(i), static_cast<int>(j)};
        }
    }
    return std::nullopt;
}

ActionVector PriorityPolicy::decide(const SystemState& x) {
    collect_keys(x, rule_, scratch_);
    const auto m = static_cast<std::size_t>(budget_.limit(x, static_cast<int>(scratch_.size())));
    ActionVector action(x.vehicles.size());
    if (m == 0) return action;
    if (m < scratch_.size())
        std::nth_element(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(m) - 1, scratch_.end());
    for (std::size_t k = 0; k < m; ++k) action.set(static_cast<std::size_t>(scratch_[k] & kIndexMask), true);
    return action;
}

std::unique_ptr<Policy> make_policy(std::string_view name, const ScenarioModel& model) {
    return std::make_unique<PriorityPolicy>(parse_priority_rule(name), ChargeBudgetRule::from_spec(model.budget, model.grid));
}

}  // namespace evsched
