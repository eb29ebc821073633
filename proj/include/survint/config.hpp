#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "survint/population.hpp"
#include "survint/simulation.hpp"

namespace survint {

// Strict parsers: unknown keys are rejected with the offending key named.
// Every table accepts partial overrides of the bundled defaults.
PopulationConfig population_config_from_json(const nlohmann::json& doc);
nlohmann::json population_config_to_json(const PopulationConfig& config);

struct PopulationSource {
    std::optional<PopulationConfig> synthesize;
    std::optional<std::string> load_path;
};

struct ScenarioFile {
    ScenarioConfig scenario;
    PopulationSource population;
};

ScenarioFile scenario_file_from_json(const nlohmann::json& doc);

PopulationFrame realize_population(const PopulationSource& source);

// Reads and parses a JSON document; io and parse failures carry the path.
nlohmann::json load_json_file(const std::string& path);

// Applies one dotted-path override ("replicates=500",
// "scenario.missingness=SNAR") onto a JSON document. Values parse as JSON
// when possible, otherwise as strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace survint
