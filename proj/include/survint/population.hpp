#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "survint/frame.hpp"
#include "survint/moments.hpp"

namespace survint {

// Moment targets for one (frame, reported) employment pair plus their
// covariance.
struct PairSpec {
    MomentSpec frame;
    MomentSpec reported;
    double covariance = 0.0;
};

// Noise attached to the weekly-wage generator for one size group.
//   wage = national_average * f * reported_employment + eps
//   f    = industry_factor + Normal(0, factor_variance)
//   eps  = Normal(0, additive_variance * frame_employment)
struct WageNoise {
    double factor_variance = 0.0;
    double additive_variance = 0.0;
};

struct MeasurementErrorConfig {
    double factor_mean = 0.85;
    double factor_variance = 0.025;
    double contamination_rate = 0.02;
    double contamination_low = 0.4;
    double contamination_high = 0.6;
};

// Population composition. The bundled defaults are a plausible product
// structure (size x industry x state); conditional tables can replace the
// marginals cell by cell.
struct Proportions {
    std::array<double, kNumSizeGroups> size_groups{};
    // industry_given_size[g][d]: share of industry d within size group g.
    std::array<std::array<double, kNumIndustries>, kNumSizeGroups> industry_given_size{};
    // state_given_cell[g * kNumIndustries + d][s]
    std::vector<std::array<double, kNumStates>> state_given_cell;
};

struct PopulationConfig {
    std::uint64_t n = 900000;
    Proportions proportions;
    std::array<PairSpec, kNumSizeGroups> moments{};
    double national_average_earnings = 1740.0;
    std::array<double, kNumIndustries> wage_factors{};
    std::array<WageNoise, kNumSizeGroups> wage_noise{};
    std::array<double, kNumIndustries> overtime_probability{};
    double overtime_factor_mean = 0.1;
    MeasurementErrorConfig measurement_error;
    // Interpret the second parameter of the wage / measurement-error normals
    // as a standard deviation instead of a variance (sensitivity switch).
    bool variance_as_sd = false;
    std::uint64_t seed = 20240001;
};

PopulationConfig default_population_config(std::uint64_t n = 900000);

std::uint64_t population_config_hash(const PopulationConfig& config);

// Builds the synthetic business population. Pure function of the config
// (including its seed); cells use independent derived streams.
PopulationFrame synthesize_population(const PopulationConfig& config);

// CSV round trip. The schema is fixed:
// unit_id,state,industry_division,size_group,frame_employment,
// reported_employment,earnings,overtime,earnings_star,emp_star,ovt_star
void save_population(const PopulationFrame& frame, const std::string& path);
PopulationFrame load_population(const std::string& path);

// Largest-remainder apportionment of n into weighted cells; ties broken by
// cell index. Exposed for tests.
std::vector<std::uint64_t> largest_remainder_counts(std::uint64_t n,
                                                    const std::vector<double>& weights);

}  // namespace survint
