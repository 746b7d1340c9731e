#include "doctest.h"
#include "oracles.hpp"

#include "evsched/core.hpp"
#include "evsched/random.hpp"

#include <vector>

using namespace evsched;

namespace {

SystemState state_of(std::vector<VehicleState> v, int grid = 0) { return SystemState{std::move(v), grid, 0}; }

ActionVector bits(std::vector<std::uint8_t> b) { return ActionVector::from_bits(std::move(b)); }

std::vector<VehicleState> all_present(int max_stay, int max_request) {
    std::vector<VehicleState> out;
    for (int l = 1; l <= max_stay; ++l)
        for (int g = 0; g <= max_request; ++g) out.push_back({l, g});
    return out;
}

}  // namespace

TEST_SUITE("core") {
    TEST_CASE("laxity") {
        CHECK(laxity({8, 5}, 10) == 3);
        CHECK(laxity({2, 0}, 10) == 10);
        CHECK(laxity({1, 3}, 10) == -2);
    }

    TEST_CASE("compare_priority examples") {
        CHECK(compare_priority({2, 1}, {3, 2}, 10) == PriorityOrdering::JOverI);
        CHECK(compare_priority({3, 2}, {2, 1}, 10) == PriorityOrdering::IOverJ);
        CHECK(compare_priority({3, 2}, {3, 2}, 10) == PriorityOrdering::Equal);
        // theta 1, gamma 2 against theta 2, gamma 3
        CHECK(compare_priority({3, 2}, {5, 3}, 10) == PriorityOrdering::Incomparable);
        CHECK_THROWS_AS((void)compare_priority(kEmptyCharger, {3, 2}, 10), InvalidStateError);
    }

    TEST_CASE("vehicle validation") {
        const Dimensions dims{2, 4, 3};
        CHECK_NOTHROW(validate(VehicleState{4, 3}, dims));
        CHECK_NOTHROW(validate(kEmptyCharger, dims));
        CHECK_THROWS_AS(validate(VehicleState{0, 1}, dims), InvalidStateError);
        CHECK_THROWS_AS(validate(VehicleState{5, 1}, dims), InvalidStateError);
        CHECK_THROWS_AS(validate(VehicleState{2, 4}, dims), InvalidStateError);
        CHECK_THROWS_AS(validate(VehicleState{2, -1}, dims), InvalidStateError);
    }

    TEST_CASE("penalty tables") {
        const auto lin = PenaltyFunction::linear(10);
        const auto quad = PenaltyFunction::quadratic(10);
        CHECK(lin(10) == Rational{10});
        CHECK(quad(10) == Rational{100});
        CHECK(quad(0) == Rational{0});
        CHECK(lin.has_convex_increments());
        CHECK_THROWS_AS((void)PenaltyFunction::from_table({1, 2}), std::invalid_argument);
        CHECK_THROWS_AS((void)PenaltyFunction::from_table({0, 3, 4, 4}), std::invalid_argument);
        const auto concave = PenaltyFunction::from_table_unchecked({0, 3, 4, 4});
        CHECK_FALSE(concave.has_convex_increments());
        CHECK_THROWS_AS((void)lin(11), std::out_of_range);
    }

    TEST_CASE("stage cost examples") {
        // capacity 40, two charged, one departing with one unit left
        const auto cap = ChargingCost::capacity({40}, Rational{4000});
        const auto x = state_of({{1, 2}, {5, 3}});
        const auto c = stage_cost_parts(x, bits({1, 1}), cap, PenaltyFunction::linear(10));
        CHECK(c.charging == Rational{0});
        CHECK(c.penalty == Rational{1});
        CHECK(c.total() == Rational{1});

        const auto quad = ChargingCost::quadratic({3});
        CHECK(stage_cost(state_of({{4, 2}, {5, 3}}), bits({1, 1}), quad, PenaltyFunction::linear(10)) == Rational{25});

        CHECK(stage_cost(state_of({{1, 1}}), bits({1}), cap, PenaltyFunction::quadratic(10)) == Rational{0});
        CHECK(cap(41, 0) == Rational{4000});
        CHECK_THROWS_AS((void)stage_cost(state_of({{3, 0}}), bits({1}), cap, PenaltyFunction::linear(10)),
                        InfeasibleActionError);
    }

    TEST_CASE("step_vehicles examples") {
        CHECK(step_vehicles(state_of({{8, 5}}), bits({1})).front() == VehicleState{7, 4});
        CHECK(step_vehicles(state_of({{1, 2}}), bits({1})).front() == kEmptyCharger);
        CHECK(step_vehicles(state_of({{3, 0}}), bits({0})).front() == VehicleState{2, 0});
        CHECK(step_vehicles(state_of({kEmptyCharger}), bits({0})).front() == kEmptyCharger);
        CHECK_THROWS_AS((void)step_vehicles(state_of({kEmptyCharger}), bits({1})), InfeasibleActionError);
        CHECK_THROWS_AS((void)step_vehicles(state_of({{2, 1}}), bits({1, 0})), InfeasibleActionError);
    }

    TEST_CASE("action aggregate tracks set bits") {
        ActionVector a(4);
        a.set(1, true);
        a.set(3, true);
        a.set(1, true);
        CHECK(a.aggregate() == 2);
        a.set(1, false);
        CHECK(a.aggregate() == 1);
        CHECK(unfinished_count(state_of({{3, 0}, {2, 1}, kEmptyCharger, {4, 4}})) == 2);
    }
}

TEST_SUITE("properties") {
    TEST_CASE("priority order laws hold exhaustively for B, E up to 10") {
        for (int b = 1; b <= 10; ++b) {
            for (int e = 1; e <= 10; ++e) {
                const auto vs = all_present(b, e);
                const auto n = vs.size();
                std::vector<char> rel(n * n);
                for (std::size_t p = 0; p < n; ++p)
                    for (std::size_t q = 0; q < n; ++q) {
                        // rel[p][q]: p has priority over q
                        const bool lib = has_priority_over(vs[p], vs[q], b);
                        const bool ref = oracle::j_over_i(vs[q].lambda, vs[q].gamma, vs[p].lambda, vs[p].gamma, b);
                        REQUIRE(lib == ref);
                        rel[p * n + q] = lib ? 1 : 0;
                        const auto ord = compare_priority(vs[q], vs[p], b);
                        REQUIRE((ord == PriorityOrdering::JOverI) == lib);
                    }
                for (std::size_t p = 0; p < n; ++p) {
                    REQUIRE(rel[p * n + p] == 0);
                    for (std::size_t q = 0; q < n; ++q) {
                        if (rel[p * n + q]) REQUIRE(rel[q * n + p] == 0);
                        if (!rel[p * n + q]) continue;
                        for (std::size_t r = 0; r < n; ++r)
                            if (rel[q * n + r]) REQUIRE(rel[p * n + r] == 1);
                    }
                }
            }
        }
    }

    TEST_CASE("less laxity and a later deadline means priority") {
        const int b = 10;
        for (const auto& vi : all_present(b, 10))
            for (const auto& vj : all_present(b, 10)) {
                if (vi.gamma == 0 || vj.gamma == 0) continue;
                const bool premise = laxity(vi, b) >= laxity(vj, b) && vi.lambda <= vj.lambda &&
                                     !(laxity(vi, b) == laxity(vj, b) && vi.lambda == vj.lambda);
                if (premise) CHECK(compare_priority(vi, vj, b) == PriorityOrdering::JOverI);
            }
    }

    TEST_CASE("laxity drops by one when idle and holds when charged") {
        for (const auto& v : all_present(10, 10)) {
            if (v.gamma == 0 || v.lambda < 2) continue;
            const auto idle = step_vehicles(state_of({v}), bits({0})).front();
            const auto charged = step_vehicles(state_of({v}), bits({1})).front();
            CHECK(laxity(idle, 10) == laxity(v, 10) - 1);
            if (charged.gamma > 0) CHECK(laxity(charged, 10) == laxity(v, 10));
        }
    }

    TEST_CASE("stage cost splits into grid part and departure part") {
        RandomStream rng(5);
        const auto cost = ChargingCost::capacity({1, 2, 3}, Rational{50});
        const auto q = PenaltyFunction::quadratic(4);
        for (int k = 0; k < 2000; ++k) {
            SystemState x;
            x.grid = static_cast<int>(rng.uniform_int(0, 2));
            ActionVector a(5);
            for (int c = 0; c < 5; ++c) {
                const int l = static_cast<int>(rng.uniform_int(0, 4));
                const int g = l == 0 ? 0 : static_cast<int>(rng.uniform_int(0, 4));
                x.vehicles.push_back({l, g});
            }
            a = ActionVector(5);
            long expected_penalty = 0;
            for (std::size_t c = 0; c < 5; ++c) {
                const bool on = x.vehicles[c].chargeable() && rng.uniform() < 0.5;
                a.set(c, on);
                if (x.vehicles[c].lambda == 1) {
                    const long left = x.vehicles[c].gamma - (on ? 1 : 0);
                    expected_penalty += left * left;
                }
            }
            const auto parts = stage_cost_parts(x, a, cost, q);
            const int cap = x.grid + 1;
            CHECK(parts.charging == (a.aggregate() <= cap ? Rational{0} : Rational{50}));
            CHECK(parts.penalty == Rational{expected_penalty});
        }
    }
}
