#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "survint/bigdata.hpp"
#include "survint/design.hpp"
#include "survint/estimators.hpp"
#include "survint/population.hpp"

namespace survint {

enum class Missingness { sar, snar };

// Which probability-sample design an estimator consumes; big-data-only rows
// need none.
enum class EstimatorDesign { single, dual_screening, cutoff, bigdata_only };

struct EstimatorInfo {
    EstimatorDesign design;
    bool needs_measurement_models;  // *_cor estimators
};

// id -> design attribution and requirements; throws on unknown ids.
const std::map<std::string, EstimatorInfo>& estimator_catalog();

struct ScenarioConfig {
    Missingness missingness = Missingness::sar;
    bool measurement_error = false;
    std::vector<DesignKind> designs = {DesignKind::single, DesignKind::dual_screening,
                                       DesignKind::cutoff};
    std::vector<std::string> estimators;
    std::uint32_t replicates = 200;
    std::uint64_t seed = 20240001;
    std::optional<SelectionModel> selection;  // default chosen by missingness
    std::optional<bool> use_starred;          // default: measurement_error
    std::vector<ConstraintSpec> constraints = default_constraints();
    std::uint32_t min_stratum_n = 6;
    // Benchmarks for the KW calibration step: frame totals, or totals
    // estimated from A (pseudo-calibration).
    bool kw_cal_estimated_benchmarks = false;

    std::string scenario_id() const;
    SelectionModel selection_model() const;
    bool read_starred() const { return use_starred.value_or(measurement_error); }
};

// One replicate's outcome for a single estimator.
struct ReplicateEstimate {
    bool failed = false;
    std::string failure_code;
    Totals totals;
    double awe = 0.0;
    std::map<std::string, double> diagnostics;
};

struct ReplicateResult {
    std::vector<ReplicateEstimate> estimates;         // aligned with the roster
    std::map<DesignKind, double> realized_sample_size;
};

// Pre-computed, replicate-invariant scenario state (stratifications and
// allocations for the fixed designs, selection probabilities, truths).
class ScenarioContext {
public:
    ScenarioContext(const ScenarioConfig& config, const PopulationFrame& frame);

    ReplicateResult run_replicate(std::uint32_t replicate_index) const;

    const PopulationFrame& frame() const { return *frame_; }
    const ScenarioConfig& config() const { return config_; }
    const Totals& truth() const { return truth_; }
    double truth_awe() const { return truth_awe_; }

private:
    ScenarioConfig config_;
    const PopulationFrame* frame_;
    Totals truth_;
    double truth_awe_ = 0.0;
    std::vector<double> selection_pi_;
    std::vector<std::uint32_t> all_units_;

    struct FixedDesign {
        DesignFrames frames;
        StratifiedFrame stratification;
        Allocation allocation;
    };
    std::optional<FixedDesign> single_, cutoff_;
    bool wants_dual_ = false;

    bool needs_kw_ = false, needs_kw_earn_ = false, needs_alp_ = false, needs_frame_model_ = false,
         needs_me_models_ = false, needs_reg_imputer_ = false;
};

struct CellStats {
    double rb = 0.0;
    double rrmse = 0.0;
    std::uint32_t n_used = 0;
    std::uint32_t n_failures = 0;
};

struct EstimatorSummary {
    std::string id;
    EstimatorDesign design;
    std::array<CellStats, 4> by_variable;  // earn, emp, ovt, awe
    std::map<std::string, double> diagnostics;
};

struct ScenarioResult {
    std::string scenario_id;
    std::vector<EstimatorSummary> estimators;
    std::map<DesignKind, double> mean_sample_size;
    Totals truth;
    double truth_awe = 0.0;
    std::uint32_t replicates = 0;
};

// Monte Carlo relative bias and relative root mean squared error per
// estimator and variable; failed replicates are excluded per estimator.
ScenarioResult aggregate(const ScenarioConfig& config, const ScenarioContext& context,
                         const std::vector<ReplicateResult>& replicates);

// Runs all replicates (threads = 0 picks the hardware count) and aggregates.
// Output is independent of the thread count.
ScenarioResult run_scenario(const ScenarioConfig& config, const PopulationFrame& frame,
                            std::uint32_t threads = 0);

}  // namespace survint
