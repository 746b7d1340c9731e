#pragma once

#include "evsched/core.hpp"
#include "evsched/models.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evsched {

/// Number of vehicles a heuristic charges at x: min(capacity(x), V(x)).
class ChargeBudgetRule {
public:
    static ChargeBudgetRule grid_capacity(std::vector<int> capacity_by_grid_state);
    static ChargeBudgetRule constant(int budget);
    static ChargeBudgetRule unlimited();
    static ChargeBudgetRule from_spec(const BudgetSpec& spec, const GridModel& grid);

    [[nodiscard]] int operator()(const SystemState& x) const;
    /// Same, given V(x) already counted.
    [[nodiscard]] int limit(const SystemState& x, int unfinished) const;

private:
    BudgetSpec::Kind kind_ = BudgetSpec::Kind::Unlimited;
    int constant_ = 0;
    std::vector<int> capacity_;
};

struct PolicyDecision {
    ActionVector action;
    /// Chargeable chargers in the order the rule ranked them.
    std::vector<int> ranking;
};

enum class PriorityRule { Edf, Llsp, Lllp };

[[nodiscard]] std::string to_string(PriorityRule rule);
[[nodiscard]] PriorityRule parse_priority_rule(std::string_view name);

/// Earliest departure first, then less laxity, then lower charger index.
[[nodiscard]] PolicyDecision edf(const SystemState& x, const ChargeBudgetRule& budget);
/// Least laxity first, then shorter remaining processing, then charger index.
[[nodiscard]] PolicyDecision llsp(const SystemState& x, const ChargeBudgetRule& budget);
/// Least laxity first, then longer remaining processing, then charger index.
[[nodiscard]] PolicyDecision lllp(const SystemState& x, const ChargeBudgetRule& budget);
[[nodiscard]] PolicyDecision prioritize(const SystemState& x, const ChargeBudgetRule& budget, PriorityRule rule);

struct ChargerPair {
    int i = 0;  ///< charged
    int j = 0;  ///< idle, with priority over i

    friend bool operator==(const ChargerPair&, const ChargerPair&) = default;
};

/// First (i, j) in lexicographic order with a_i = 1, a_j = 0 and j having
/// priority over i; nullopt if a respects the priority order.
[[nodiscard]] std::optional<ChargerPair> check_lllp_compliance(const SystemState& x, const ActionVector& a,
                                                               int max_stay);

/// A (possibly history-dependent) scheduling policy. decide() is called
/// once per stage in stage order.
class Policy {
public:
    virtual ~Policy() = default;
    virtual ActionVector decide(const SystemState& x) = 0;
    [[nodiscard]] virtual std::unique_ptr<Policy> clone() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

class PriorityPolicy final : public Policy {
public:
    PriorityPolicy(PriorityRule rule, ChargeBudgetRule budget) : rule_(rule), budget_(std::move(budget)) {}

    ActionVector decide(const SystemState& x) override;
    [[nodiscard]] std::unique_ptr<Policy> clone() const override { return std::make_unique<PriorityPolicy>(*this); }
    [[nodiscard]] std::string name() const override { return to_string(rule_); }
    [[nodiscard]] PriorityRule rule() const { return rule_; }
    [[nodiscard]] const ChargeBudgetRule& budget() const { return budget_; }

private:
    PriorityRule rule_;
    ChargeBudgetRule budget_;
    std::vector<std::uint64_t> scratch_;
};

/// "edf" | "llsp" | "lllp" with the scenario's budget rule.
[[nodiscard]] std::unique_ptr<Policy> make_policy(std::string_view name, const ScenarioModel& model);

}  // namespace evsched
