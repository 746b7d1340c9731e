#include "doctest.h"

#include "evsched/scenario_io.hpp"

#include <filesystem>

using namespace evsched;
using nlohmann::json;

namespace {

std::string scenario_path(const char* name) { return std::string(EVSCHED_SCENARIO_DIR) + "/" + name; }

}  // namespace

TEST_SUITE("scenario_io") {
    TEST_CASE("rational values") {
        CHECK(rational_from_json(json(3), "x") == Rational{3});
        CHECK(rational_from_json(json("2/6"), "x") == Rational(1, 3));
        CHECK(rational_from_json(json(0.1), "x") == Rational(1, 10));
        CHECK(rational_to_json(Rational(3, 4)) == json("3/4"));
        CHECK(rational_to_json(Rational{5}) == json(5));
        CHECK_THROWS_AS((void)rational_from_json(json::array(), "x"), ConfigError);
    }

    TEST_CASE("shipped scenarios load and validate") {
        for (const auto& entry : std::filesystem::directory_iterator(EVSCHED_SCENARIO_DIR)) {
            if (entry.path().extension() != ".json") continue;
            CAPTURE(entry.path().string());
            const auto m = load_scenario(entry.path().string());
            CHECK_NOTHROW(m.validate());
        }
    }

    TEST_CASE("capacity benchmark file matches the built-in scenario") {
        const auto file = load_scenario(scenario_path("sec5.json"));
        const auto built = scenario_sec5(20);
        CHECK(file.dims == built.dims);
        CHECK(file.grid.state_count() == built.grid.state_count());
        CHECK(file.grid.cost(41, 0) == built.grid.cost(41, 0));
        CHECK(file.grid.cost(160, 120) == built.grid.cost(160, 120));
        CHECK(file.demand.law(0).marks == built.demand.law(0).marks);
        CHECK(file.demand.law(0).count.probability(20) == Rational{1});
    }

    TEST_CASE("canonical form round-trips") {
        for (const char* name : {"tiny.json", "multichain.json", "nonconvex.json", "two_vehicle.json"}) {
            CAPTURE(name);
            const auto m = load_scenario(scenario_path(name));
            const auto doc = scenario_to_json(m);
            const auto again = scenario_from_json(doc);
            CHECK(scenario_to_json(again) == doc);
            CHECK(again.dims == m.dims);
        }
    }

    TEST_CASE("malformed documents are rejected") {
        CHECK_THROWS_AS((void)scenario_from_string("{"), ConfigError);
        CHECK_THROWS_AS((void)scenario_from_string(R"({"N":1,"B":1,"E":1,"bogus":0})"), ConfigError);
        CHECK_THROWS_AS((void)scenario_from_string(
                            R"({"N":1,"B":1,"E":1,"grid":{"states":2,"iid":["1/2","1/3"]},"arrival":"none"})"),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)scenario_from_string(R"({"N":1,"B":1,"E":2,"grid":{"states":[0],"iid":[1]},"penalty":[0,3,4]})"), std::invalid_argument);
        CHECK_THROWS_AS((void)load_scenario("/nonexistent/file.json"), ConfigError);
    }

    TEST_CASE("states round-trip") {
        const SystemState x{{{2, 1}, kEmptyCharger, {5, 5}}, 3, 1};
        CHECK(state_from_json(state_to_json(x)) == x);
    }
}
