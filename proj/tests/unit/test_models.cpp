#include "doctest.h"

#include "evsched/models.hpp"
#include "evsched/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

using namespace evsched;

namespace {

/// Three-state grid whose kernel depends on the aggregate action.
ScenarioModel coupled_fixture() {
    ScenarioModel m;
    m.dims = {6, 4, 3};
    m.penalty = PenaltyFunction::quadratic(3);
    const std::vector<int> values{1, 2, 4};
    std::vector<std::vector<Distribution>> blocks;
    for (int a = 0; a <= 6; ++a) {
        std::vector<Distribution> rows;
        for (int s = 0; s < 3; ++s) {
            const std::int64_t w = 1 + (a + s) % 3;
            rows.push_back(Distribution::from_probabilities({Rational(w, w + 4), Rational(2, w + 4), Rational(2, w + 4)}));
        }
        blocks.push_back(std::move(rows));
    }
    m.grid = GridModel::action_dependent(values, std::move(blocks), ChargingCost::quadratic(values));
    ArrivalLaw busy{Distribution::from_probabilities({Rational(1, 4), Rational(1, 4), Rational(1, 2)}),
                    {{1, 1}, {3, 2}, {4, 3}, {2, 0}},
                    Distribution::uniform(4)};
    ArrivalLaw quiet = ArrivalLaw::none();
    m.demand = DemandModel({Distribution::from_probabilities({Rational(1, 2), Rational(1, 2)}),
                            Distribution::from_probabilities({Rational(1, 3), Rational(2, 3)})},
                           {busy, quiet});
    m.budget = {BudgetSpec::Kind::Unlimited, 0};
    m.validate();
    return m;
}

/// A random feasible action charging exactly `count` of the chargeable chargers.
ActionVector random_subset(const SystemState& x, int count, RandomStream& rng) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < x.vehicles.size(); ++i)
        if (x.vehicles[i].chargeable()) open.push_back(i);
    for (std::size_t k = open.size(); k > 1; --k)
        std::swap(open[k - 1], open[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1))]);
    ActionVector a(x.vehicles.size());
    for (int k = 0; k < count; ++k) a.set(open[static_cast<std::size_t>(k)], true);
    return a;
}

}  // namespace

TEST_SUITE("models") {
    TEST_CASE("distribution validation and sampling") {
        CHECK_THROWS_AS((void)Distribution::from_probabilities({Rational(1, 2), Rational(1, 3)}), ModelError);
        CHECK_THROWS_AS((void)Distribution::from_probabilities({Rational{-1}, Rational{2}}), ModelError);
        CHECK_THROWS_AS((void)Distribution::from_probabilities({}), ModelError);
        // decimal rows within 1e-12 are accepted and made exact
        const auto d = Distribution::from_probabilities(
            {Rational::parse("0.3333333333333"), Rational::parse("0.3333333333333"), Rational::parse("0.3333333333334")});
        CHECK(d.probability(0) + d.probability(1) + d.probability(2) == Rational{1});
        CHECK_THROWS_AS((void)Distribution::from_probabilities({Rational::parse("0.5"), Rational::parse("0.4999")}),
                        ModelError);

        const auto p = Distribution::from_probabilities({Rational(1, 4), Rational{0}, Rational(3, 4)});
        CHECK(p.sample(0.0) == 0);
        CHECK(p.sample(0.2499) == 0);
        CHECK(p.sample(0.25) == 2);
        CHECK(p.sample(0.999999) == 2);
        CHECK(Distribution::point(5, 3).sample(0.0) == 3);
        CHECK(Distribution::point(5, 3).sample(0.9999999) == 3);
    }

    TEST_CASE("uniform sampling frequencies") {
        const auto u = Distribution::uniform(4);
        RandomStream rng(11);
        std::array<int, 4> hits{};
        const int n = 200000;
        for (int k = 0; k < n; ++k) ++hits[static_cast<std::size_t>(u.sample(rng.uniform()))];
        for (int h : hits) CHECK(std::abs(h - n / 4) < 5 * std::sqrt(n * 0.25 * 0.75));
    }

    TEST_CASE("grid sampling") {
        const auto bench = scenario_sec5(20);
        CHECK(bench.grid.state_count() == 121);
        CHECK(bench.grid.value(0) == 40);
        CHECK(bench.grid.value(120) == 160);
        RandomStream a(3, 7, StreamSource::Grid);
        RandomStream b(3, 7, StreamSource::Grid);
        for (int k = 0; k < 50; ++k) CHECK(bench.grid.sample(k % 121, k, a) == bench.grid.sample(0, 0, b));

        const auto point = GridModel::markov({0, 1}, {Distribution::point(2, 1), Distribution::point(2, 0)},
                                             ChargingCost::quadratic({0, 1}));
        RandomStream r(1);
        CHECK(point.sample(0, 0, r) == 1);
        CHECK(point.sample(1, 0, r) == 0);
    }

    TEST_CASE("uniform stay and request marks") {
        const auto law = ArrivalLaw::uniform_stay_request(3, 10);
        CHECK(law.marks.size() == 55);
        Rational sum{0};
        for (const auto& p : law.mark_probabilities.probabilities()) sum += p;
        CHECK(sum == Rational{1});
        CHECK(law.zero_arrival_probability() == Rational{0});
        CHECK(ArrivalLaw::none().zero_arrival_probability() == Rational{1});
    }

    TEST_CASE("arrival laws") {
        const auto dm = DemandModel::single(ArrivalLaw::none());
        RandomStream t(1), m(2);
        const auto draw = dm.sample(0, t, m);
        CHECK(draw.next == 0);
        CHECK(draw.arrivals.empty());

        const auto forced = DemandModel::single(ArrivalLaw::uniform_stay_request(1, 1));
        const auto one = forced.sample(0, t, m);
        REQUIRE(one.arrivals.size() == 1);
        CHECK(one.arrivals[0] == VehicleState{1, 1});

        // stay uniform on 1..10, request uniform on 1..stay
        const auto bench = DemandModel::single(ArrivalLaw::uniform_stay_request(20, 10));
        std::map<int, int> stays;
        std::map<std::pair<int, int>, int> pairs;
        const int draws = 5000;
        for (int k = 0; k < draws; ++k) {
            RandomStream ts(9, k, StreamSource::Demand), ms(9, k, StreamSource::Arrivals);
            const auto d = bench.sample(0, ts, ms);
            REQUIRE(d.arrivals.size() == 20);
            for (const auto& v : d.arrivals) {
                REQUIRE(v.gamma >= 1);
                REQUIRE(v.gamma <= v.lambda);
                ++stays[v.lambda];
                ++pairs[{v.lambda, v.gamma}];
            }
        }
        const double n = draws * 20.0;
        for (int s = 1; s <= 10; ++s) CHECK(std::abs(stays[s] / n - 0.1) < 0.005);
        CHECK(std::abs(pairs[{10, 10}] / n - 0.01) < 0.002);
        CHECK(std::abs(pairs[{2, 1}] / n - 0.05) < 0.004);
    }

    TEST_CASE("admit examples") {
        std::vector<VehicleState> empty(4, kEmptyCharger);
        const std::vector<VehicleState> three{{1, 1}, {2, 1}, {3, 3}};
        auto r = admit(empty, three);
        CHECK(r.rejected == 0);
        CHECK(r.vehicles[0] == VehicleState{1, 1});
        CHECK(r.vehicles[1] == VehicleState{2, 1});
        CHECK(r.vehicles[2] == VehicleState{3, 3});
        CHECK(r.vehicles[3] == kEmptyCharger);

        const std::vector<VehicleState> full(3, VehicleState{2, 2});
        r = admit(full, std::vector<VehicleState>{{1, 1}, {1, 1}});
        CHECK(r.rejected == 2);
        CHECK(r.vehicles == full);

        std::vector<VehicleState> one_gap(8, VehicleState{4, 1});
        one_gap[5] = kEmptyCharger;
        r = admit(one_gap, std::vector<VehicleState>{{3, 2}, {2, 2}});
        CHECK(r.rejected == 1);
        CHECK(r.vehicles[5] == VehicleState{3, 2});
    }

    TEST_CASE("capacity benchmark constants") {
        const auto lin = scenario_sec5(20, PenaltyKind::Linear);
        const auto quad = scenario_sec5(20, PenaltyKind::Quadratic);
        CHECK(lin.grid.cost(41, 0) == Rational{4000});
        CHECK(lin.grid.cost(40, 0) == Rational{0});
        CHECK(quad.grid.cost(161, 120) == Rational{40000});
        CHECK(lin.dims == Dimensions{400, 10, 10});
        CHECK_NOTHROW(lin.validate());
        CHECK_THROWS_AS((void)scenario_sec5(-1), std::invalid_argument);
    }

    TEST_CASE("validation rejects inconsistent scenarios") {
        auto m = scenario_sec5(5);
        m.penalty = PenaltyFunction::linear(9);
        CHECK_THROWS_AS(m.validate(), ModelError);
        auto g = coupled_fixture();
        g.dims.chargers = 5;  // kernel still has 7 blocks
        CHECK_THROWS_AS(g.validate(), ModelError);
    }

    TEST_CASE("stage order: cost, departures, arrivals, grid") {
        ScenarioModel m;
        m.dims = {2, 2, 2};
        m.penalty = PenaltyFunction::linear(2);
        m.grid = GridModel::markov({0, 1}, {Distribution::point(2, 1), Distribution::point(2, 0)},
                                   ChargingCost::table({{0, 0}, {5, 7}, {10, 14}}));
        m.demand = DemandModel::single(ArrivalLaw::fixed_count(1, {{2, 2}}, Distribution::point(1, 0)));
        m.budget = {BudgetSpec::Kind::Unlimited, 0};
        SystemState x{{{1, 2}, kEmptyCharger}, 1, 0};
        const auto r = advance_stage(m, x, ActionVector::from_bits({1, 0}), 1, 0);
        CHECK(r.cost.charging == Rational{7});
        CHECK(r.cost.penalty == Rational{1});
        // the departing vehicle frees charger 0 before the arrival is placed
        CHECK(x.vehicles[0] == VehicleState{2, 2});
        CHECK(x.vehicles[1] == kEmptyCharger);
        CHECK(x.grid == 0);
    }
}

TEST_SUITE("properties") {
    TEST_CASE("equal aggregate actions give equal exogenous paths") {
        const auto m = coupled_fixture();
        RandomStream pick(77);
        for (int run = 0; run < 1000; ++run) {
            const std::uint64_t seed = mix_seed(1234, static_cast<std::uint64_t>(run));
            SystemState xa = initial_state(m, seed);
            SystemState xb = xa;
            for (int t = 0; t < 30; ++t) {
                const int count = std::min(unfinished_count(xa), unfinished_count(xb));
                const int a_count = static_cast<int>(pick.uniform_int(0, count));
                const auto a = random_subset(xa, a_count, pick);
                const auto b = random_subset(xb, a_count, pick);
                (void)advance_stage(m, xa, a, seed, t);
                (void)advance_stage(m, xb, b, seed, t);
                REQUIRE(xa.grid == xb.grid);
                REQUIRE(xa.demand == xb.demand);
            }
        }
    }

    TEST_CASE("admitted multiset does not depend on which chargers were free") {
        RandomStream rng(8);
        for (int k = 0; k < 2000; ++k) {
            std::vector<VehicleState> a(10, kEmptyCharger), b(10, kEmptyCharger);
            const int occupied = static_cast<int>(rng.uniform_int(0, 10));
            // same number of occupied chargers, at different positions
            for (int c = 0; c < occupied; ++c) a[static_cast<std::size_t>(c)] = {5, 5};
            for (int c = 0; c < occupied; ++c) b[static_cast<std::size_t>(9 - c)] = {5, 5};
            std::vector<VehicleState> arrivals;
            const int n = static_cast<int>(rng.uniform_int(0, 12));
            for (int c = 0; c < n; ++c)
                arrivals.push_back({static_cast<int>(rng.uniform_int(1, 4)), static_cast<int>(rng.uniform_int(1, 4))});
            auto ra = admit(a, arrivals);
            auto rb = admit(b, arrivals);
            CHECK(ra.rejected == rb.rejected);
            auto key = [](const VehicleState& v) { return v.lambda * 100 + v.gamma; };
            std::vector<int> ka, kb;
            for (const auto& v : ra.vehicles) ka.push_back(key(v));
            for (const auto& v : rb.vehicles) kb.push_back(key(v));
            std::sort(ka.begin(), ka.end());
            std::sort(kb.begin(), kb.end());
            CHECK(ka == kb);
        }
    }
}
