#pragma once

#include "evsched/exactdp.hpp"
#include "evsched/interchange.hpp"
#include "evsched/models.hpp"

#include "json.hpp"

#include <stdexcept>
#include <string>

namespace evsched {

/// Malformed scenario or config file: bad JSON, unknown key, wrong shape.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Integer, decimal number (read through its shortest decimal form) or
/// "p/q" string.
[[nodiscard]] Rational rational_from_json(const nlohmann::json& value, const std::string& where);
/// Integer when whole, otherwise a "p/q" string.
[[nodiscard]] nlohmann::json rational_to_json(const Rational& value);

[[nodiscard]] ScenarioModel scenario_from_json(const nlohmann::json& doc);
[[nodiscard]] ScenarioModel scenario_from_string(const std::string& text);
/// Throws ConfigError if the file cannot be read.
[[nodiscard]] ScenarioModel load_scenario(const std::string& path);
/// Canonical form: explicit grid values, kernel and initial law.
[[nodiscard]] nlohmann::json scenario_to_json(const ScenarioModel& model);

[[nodiscard]] nlohmann::json state_to_json(const SystemState& x);
[[nodiscard]] SystemState state_from_json(const nlohmann::json& doc);

[[nodiscard]] nlohmann::json solution_to_json(const EnumeratedMDP& mdp, const DPSolution& solution);
[[nodiscard]] nlohmann::json bundle_to_json(const ReproductionBundle& bundle);
[[nodiscard]] nlohmann::json report_to_json(const DominanceReport& report);

}  // namespace evsched
