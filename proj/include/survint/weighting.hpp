#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "survint/frame.hpp"
#include "survint/sample.hpp"

namespace survint {

// ---- Chi-square distance calibration -------------------------------------

struct CalibrationProblem {
    Eigen::VectorXd initial_weights;  // d, strictly positive
    Eigen::MatrixXd covariates;       // one row per sampled unit
    Eigen::VectorXd benchmarks;       // target totals X
    Eigen::VectorXd tuning;           // q; ones when empty
};

struct CalibrationResult {
    Eigen::VectorXd weights;      // w = d (1 + q x'lambda)
    Eigen::VectorXd multipliers;  // lambda
    int negative_weight_count = 0;
};

// Minimizes sum (w-d)^2 / (2 q d) subject to sum w x = X. Negative weights
// are allowed but counted. Throws "singular-system" on rank deficiency.
CalibrationResult chi_square_calibrate(const CalibrationProblem& problem);

// ---- Design-weighted logistic regression ----------------------------------

struct LogisticOptions {
    int max_iterations = 100;
    // Convergence: |gradient_j| <= tolerance * (1 + total_weight * scale_j).
    double tolerance = 1e-11;
};

struct LogisticFit {
    Eigen::VectorXd beta;
    int iterations = 0;
    double gradient_norm = 0.0;
};

LogisticFit fit_logistic_weighted(const Eigen::VectorXd& response,
                                  const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& case_weights,
                                  const LogisticOptions& options = {});

// ---- Propensity models over frame covariates -------------------------------

enum class PropensityKind { kim_wang, adjusted_logistic, frame_logistic };

// Covariate layout: [1, frame_employment, industry dummies C..S,
// optionally ln(max(earnings,1))]. Coefficients for industries that never
// appeared in the fit are zero.
struct PropensityModel {
    PropensityKind kind = PropensityKind::kim_wang;
    bool with_log_earnings = false;
    Eigen::VectorXd beta;

    double linear_predictor(const UnitRecord& u, double earnings_for_log = 0.0) const;
    // Inverse logit for kim_wang / frame_logistic; fitted odds (may exceed 1)
    // for adjusted_logistic.
    double propensity(const UnitRecord& u, double earnings_for_log = 0.0) const;
};

// Number of design columns for the layout above.
int propensity_design_columns(bool with_log_earnings);

// Builds design rows for the given frame units. `earnings_for_log` must be
// aligned with `units` when the layout includes the log-earnings column.
Eigen::MatrixXd propensity_design(const PopulationFrame& frame,
                                  std::span<const std::uint32_t> units, bool with_log_earnings,
                                  std::span<const double> earnings_for_log = {});

// delta observed on A (assumption: B can be linked); fit is weighted by the
// design weights so that A represents the population.
PropensityModel kw_propensities(const PopulationFrame& frame, const WeightedSample& a,
                                bool with_log_earnings,
                                std::span<const double> earnings_for_log = {});

// Pooled fit: B with Z=1 and unit weight, A with Z=0 and design weight. The
// returned propensities are the fitted odds.
PropensityModel alp_propensities(const PopulationFrame& frame, const WeightedSample& a,
                                 const BigDataset& big);

// Unweighted fit of the membership indicator over the full frame.
PropensityModel frame_propensities(const PopulationFrame& frame, const BigDataset& big);

Eigen::VectorXd evaluate_propensities(const PropensityModel& model, const PopulationFrame& frame,
                                      std::span<const std::uint32_t> units,
                                      std::span<const double> earnings_for_log = {});

// ---- Linear measurement-error model ----------------------------------------

// y_star = beta0 + beta1 * y + e, fitted by least squares of y_star on y.
struct MEModel {
    double beta0 = 0.0;
    double beta1 = 1.0;
    double residual_variance = 0.0;
    std::size_t n_fit = 0;
};

MEModel fit_me_model(std::span<const double> y_true, std::span<const double> y_star);

inline double correct_me(const MEModel& model, double y_star) {
    return (y_star - model.beta0) / model.beta1;
}

}  // namespace survint
