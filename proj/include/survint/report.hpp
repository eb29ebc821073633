#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survint/simulation.hpp"

namespace survint {

// Pinned schema: scenario,design,estimator,variable,rb,rrmse,n_replicates,n_failures
std::string render_results_csv(const ScenarioResult& result);

// One row of the results CSV.
struct ResultRow {
    std::string scenario;
    std::string design;
    std::string estimator;
    std::string variable;
    double rb = 0.0;
    double rrmse = 0.0;
    std::uint32_t n_replicates = 0;
    std::uint32_t n_failures = 0;
};

std::vector<ResultRow> parse_results_csv(const std::string& text);

// Paper-style tables: RB and RRMSE x 10^2 to one decimal, estimators grouped
// by design. The ScenarioResult overload appends the realized sample sizes.
std::string render_markdown(const std::vector<ResultRow>& rows);
std::string render_markdown(const ScenarioResult& result);

}  // namespace survint
