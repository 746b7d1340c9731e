#include "doctest.h"
#include "oracles.hpp"

#include "evsched/interchange.hpp"

#include <algorithm>

using namespace evsched;

namespace {

/// Two chargers, grid walks 0 -> 1 -> 2 -> 2 with unit charging cost
/// 1, 0, 2, budget 1, no arrivals.
ScenarioModel unit_cost_fixture() {
    ScenarioModel m;
    m.name = "unit-cost";
    m.dims = {2, 3, 2};
    m.penalty = PenaltyFunction::linear(2);
    m.grid = GridModel::markov({0, 1, 2}, {Distribution::point(3, 1), Distribution::point(3, 2), Distribution::point(3, 2)},
                               ChargingCost::table({{0, 0, 0}, {1, 0, 2}, {2, 0, 4}}));
    m.grid.set_initial(Distribution::point(3, 0));
    m.demand = DemandModel::single(ArrivalLaw::none());
    m.budget = {BudgetSpec::Kind::Constant, 1};
    return m;
}

/// Two chargers, free charging, budget 1, quadratic shortfall penalty.
ScenarioModel free_charging_fixture() {
    ScenarioModel m;
    m.name = "free-charging";
    m.dims = {2, 2, 3};
    m.penalty = PenaltyFunction::quadratic(3);
    m.grid = GridModel::iid({0}, Distribution::point(1, 0), ChargingCost::table({{0}, {0}, {0}}));
    m.demand = DemandModel::single(ArrivalLaw::none());
    m.budget = {BudgetSpec::Kind::Constant, 1};
    return m;
}

/// Small capacity scenario with random arrivals for property checks.
ScenarioModel small_capacity(PenaltyFunction q) {
    ScenarioModel m;
    m.name = "small-capacity";
    m.dims = {16, 5, 5};
    std::vector<int> caps{1, 2, 3, 4, 5, 6};
    const Rational overload = Rational{16} * q(5);
    m.penalty = std::move(q);
    m.grid = GridModel::iid(caps, Distribution::uniform(caps.size()), ChargingCost::capacity(caps, overload));
    ArrivalLaw law = ArrivalLaw::uniform_stay_request(0, 5);
    law.count = Distribution::uniform(5);  // 0..4 arrivals
    m.demand = DemandModel::single(law);
    m.budget = {BudgetSpec::Kind::GridCapacity, 0};
    m.validate();
    return m;
}

std::vector<int> bits_of(const ActionVector& a) {
    std::vector<int> out;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] ? 1 : 0);
    return out;
}

}  // namespace

TEST_SUITE("interchange") {
    TEST_CASE("find_violation") {
        const auto m = free_charging_fixture();
        const PriorityPolicy edf_p(PriorityRule::Edf, ChargeBudgetRule::constant(1));
        const PriorityPolicy lllp_p(PriorityRule::Lllp, ChargeBudgetRule::constant(1));
        const SystemState x{{{1, 1}, {2, 2}}, 0, 0};
        const auto v = find_violation(edf_p, x, 2);
        REQUIRE(v.has_value());
        CHECK(*v == ChargerPair{0, 1});
        CHECK_FALSE(find_violation(lllp_p, x, 2).has_value());
        const PriorityPolicy all(PriorityRule::Edf, ChargeBudgetRule::constant(2));
        CHECK_FALSE(find_violation(all, x, 2).has_value());
        (void)m;
    }

    TEST_CASE("wrap_interchange rejects pairs that are not violations") {
        const PriorityPolicy edf_p(PriorityRule::Edf, ChargeBudgetRule::constant(1));
        const SystemState x{{{1, 1}, {2, 2}}, 0, 0};
        CHECK_THROWS_AS((void)wrap_interchange(edf_p, x, 0, {1, 0}, 2), std::invalid_argument);
        CHECK_THROWS_AS((void)wrap_interchange(edf_p, x, 0, {0, 0}, 2), std::invalid_argument);
        CHECK_NOTHROW((void)wrap_interchange(edf_p, x, 0, {0, 1}, 2));
    }

    TEST_CASE("unit-cost fixture: swap back at stage 1, equal totals") {
        const auto m = unit_cost_fixture();
        const PriorityPolicy base(PriorityRule::Edf, ChargeBudgetRule::constant(1));
        const SystemState x0{{{2, 1}, {3, 2}}, 0, 0};
        const auto pair = find_violation(base, x0, 3);
        REQUIRE(pair.has_value());
        CHECK(*pair == ChargerPair{0, 1});

        // drive both policies by hand and record what they charge
        auto pi = base.clone();
        auto bar = wrap_interchange(base, x0, 0, *pair, 3);
        SystemState xa = x0, xb = x0;
        std::vector<std::vector<int>> acts_a, acts_b;
        Rational ca{0}, cb{0};
        for (int t = 0; t <= 2; ++t) {
            const auto a = pi->decide(xa);
            const auto b = bar->decide(xb);
            acts_a.push_back(bits_of(a));
            acts_b.push_back(bits_of(b));
            ca += advance_stage(m, xa, a, 5, t).cost.total();
            cb += advance_stage(m, xb, b, 5, t).cost.total();
        }
        CHECK(acts_a == std::vector<std::vector<int>>{{1, 0}, {0, 1}, {0, 1}});
        CHECK(acts_b == std::vector<std::vector<int>>{{0, 1}, {1, 0}, {0, 1}});
        CHECK(ca == Rational{3});
        CHECK(cb == Rational{3});
        REQUIRE(bar->window().swap_back.has_value());
        CHECK(*bar->window().swap_back == 1);
        CHECK(bar->window().span == 2);

        const auto r = coupled_rollout(m, base, x0, 0, *pair, 2, 5);
        CHECK(r.cost_base() == Rational{3});
        CHECK(r.cost_interchange() == Rational{3});
        CHECK(r.trace.stage_costs_first == std::vector<Rational>{1, 0, 2});
        CHECK(r.trace.stage_costs_second == std::vector<Rational>{1, 0, 2});
        CHECK_FALSE(r.swap_back_empty());
        CHECK_THROWS_AS((void)coupled_rollout(m, base, x0, 0, *pair, 1, 5), std::invalid_argument);
    }

    TEST_CASE("free-charging fixture: strict improvement, matches enumeration") {
        const std::vector<long> q{0, 1, 4, 9};
        // every budget-1 schedule over two stages, played by the oracle
        long best = 1 << 20;
        const std::vector<std::pair<int, int>> choices{{0, 0}, {1, 0}, {0, 1}};
        for (const auto& c0 : choices)
            for (const auto& c1 : choices) {
                if (c1.first == 1) continue;  // i has left after stage 0
                best = std::min(best, oracle::play_two(1, 1, 2, 3, {c0, c1}, q).penalty);
            }
        const auto pi_out = oracle::play_two(1, 1, 2, 3, {{1, 0}, {0, 1}}, q);
        const auto bar_out = oracle::play_two(1, 1, 2, 3, {{0, 1}, {0, 1}}, q);
        CHECK(pi_out.penalty == 4);
        CHECK(bar_out.penalty == 2);
        CHECK(best == 2);

        const auto m = free_charging_fixture();
        const PriorityPolicy base(PriorityRule::Edf, ChargeBudgetRule::constant(1));
        const SystemState x0{{{1, 1}, {2, 3}}, 0, 0};
        const auto r = coupled_rollout(m, base, x0, 0, {0, 1}, 1, 1);
        CHECK(r.cost_base() == Rational{pi_out.penalty});
        CHECK(r.cost_interchange() == Rational{bar_out.penalty});
        CHECK(r.base_shortfall.i == pi_out.shortfall_i);
        CHECK(r.base_shortfall.j == pi_out.shortfall_j);
        CHECK(r.interchange_shortfall.i == bar_out.shortfall_i);
        CHECK(r.interchange_shortfall.j == bar_out.shortfall_j);
        CHECK(r.swap_back_empty());
    }

    TEST_CASE("identical policies give identical traces") {
        const auto m = small_capacity(PenaltyFunction::linear(5));
        PriorityPolicy a(PriorityRule::Edf, ChargeBudgetRule::from_spec(m.budget, m.grid));
        PriorityPolicy b = a;
        const auto x = initial_state(m, 3);
        const auto t = run_coupled(m, a, b, x, 0, 50, 3);
        CHECK(t.stage_costs_first == t.stage_costs_second);
        CHECK(t.cost_first == t.cost_second);
    }

    TEST_CASE("certifier on a small convex scenario") {
        for (const auto rule : {PriorityRule::Edf, PriorityRule::Llsp}) {
            const auto m = small_capacity(PenaltyFunction::quadratic(5));
            const PriorityPolicy p(rule, ChargeBudgetRule::from_spec(m.budget, m.grid));
            CertifyOptions opt;
            opt.cases = 300;
            opt.seed = 17;
            const auto report = certify_dominance(m, p, opt);
            CHECK(report.passed());
            CHECK(report.cases == 300);
            CHECK(report.strict + report.equal == report.cases);
            CHECK(report.swap_back_empty + report.swap_back_found == report.cases);
        }
    }

    TEST_CASE("negative control: concave penalty breaks dominance") {
        const auto q = PenaltyFunction::from_table_unchecked({0, 3, 4, 4}, "concave");
        const auto report = certify_two_vehicle(q, PriorityRule::Edf, 2000, 3, 3, 3);
        CHECK(report.counterexamples > 0);
        CHECK_FALSE(report.passed());
        REQUIRE_FALSE(report.failures.empty());
        // replay the first counterexample from its bundle
        const auto& b = report.failures.front();
        const auto m = two_vehicle_scenario(q, 3, 3);
        const PriorityPolicy p(PriorityRule::Edf, ChargeBudgetRule::from_spec(m.budget, m.grid));
        const auto r = coupled_rollout(m, p, b.state, b.stage, b.pair, b.horizon, b.seed);
        CHECK(r.cost_base() == b.cost_base);
        CHECK(r.cost_interchange() == b.cost_interchange);
    }
}

TEST_SUITE("properties") {
    TEST_CASE("coupled rollouts are sound") {
        const auto m = small_capacity(PenaltyFunction::quadratic(5));
        std::size_t rollouts = 0;
        std::size_t found = 0;
        for (std::uint64_t run = 0; rollouts < 1000; ++run) {
            REQUIRE(run < 20000);
            const auto rule = run % 2 == 0 ? PriorityRule::Edf : PriorityRule::Llsp;
            const PriorityPolicy base(rule, ChargeBudgetRule::from_spec(m.budget, m.grid));
            const std::uint64_t seed = mix_seed(2024, run);
            SystemState x = initial_state(m, seed);
            auto scan = base.clone();
            for (int t = 0; t < 200; ++t) {
                const auto a = scan->decide(x);
                const auto pair = check_lllp_compliance(x, a, m.dims.max_stay);
                if (pair && t >= static_cast<int>(run % 13)) {
                    const int span = std::max(x.vehicles[pair->i].lambda, x.vehicles[pair->j].lambda) - 1;
                    const auto r = coupled_rollout(m, base, x, t, *pair, span + 2, seed);
                    ++rollouts;

                    // independent replay of pi alone on the same seed
                    SystemState y = x;
                    auto solo = base.clone();
                    Rational cost{0};
                    for (int k = t; k <= t + span + 2; ++k) {
                        const auto act = solo->decide(y);
                        cost += advance_stage(m, y, act, seed, k).cost.total();
                        REQUIRE(y.grid == r.trace.grid_path[static_cast<std::size_t>(k - t)]);
                        REQUIRE(y.demand == r.trace.demand_path[static_cast<std::size_t>(k - t)]);
                        REQUIRE(act.aggregate() == r.trace.aggregates[static_cast<std::size_t>(k - t)]);
                    }
                    REQUIRE(cost == r.cost_base());
                    REQUIRE(r.cost_interchange() <= r.cost_base());
                    if (r.swap_back_empty()) {
                        REQUIRE(r.interchange_shortfall.i == r.base_shortfall.i + 1);
                        REQUIRE(r.interchange_shortfall.j == r.base_shortfall.j - 1);
                    } else {
                        ++found;
                        REQUIRE(r.cost_interchange() == r.cost_base());
                        REQUIRE(*r.window.swap_back > t);
                        REQUIRE(*r.window.swap_back <= t + span);
                    }
                    break;
                }
                (void)advance_stage(m, x, a, seed, t);
            }
        }
        CHECK(found > 0);
        CHECK(found < rollouts);
    }
}
