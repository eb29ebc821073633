#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survint/bigdata.hpp"
#include "survint/frame.hpp"
#include "survint/rng.hpp"
#include "survint/sample.hpp"
#include "survint/weighting.hpp"

namespace survint {

enum class Variable { earn = 0, emp = 1, ovt = 2 };
inline constexpr std::array<const char*, 3> kVariableNames = {"earn", "emp", "ovt"};

struct Totals {
    double earn = 0.0;
    double emp = 0.0;
    double ovt = 0.0;

    double& by(Variable v) { return v == Variable::earn ? earn : v == Variable::emp ? emp : ovt; }
    double by(Variable v) const {
        return v == Variable::earn ? earn : v == Variable::emp ? emp : ovt;
    }
    Totals& operator+=(const Totals& o) {
        earn += o.earn;
        emp += o.emp;
        ovt += o.ovt;
        return *this;
    }
};

// How the survey values of a B-side unit are read: the true values, the
// recorded (possibly mis-measured) values, or recorded values passed through
// fitted measurement-error corrections.
struct MEModels {
    MEModel earn, emp, ovt;
};

class ValueSource {
public:
    static ValueSource true_values() { return ValueSource{false, nullptr}; }
    static ValueSource recorded(bool use_starred) { return ValueSource{use_starred, nullptr}; }
    static ValueSource corrected(bool use_starred, const MEModels* models) {
        return ValueSource{use_starred, models};
    }

    Totals values(const UnitRecord& u) const {
        Totals t;
        if (use_starred_) {
            t.earn = u.earnings_star;
            t.emp = u.emp_star;
            t.ovt = u.ovt_star;
        } else {
            t.earn = u.earnings;
            t.emp = static_cast<double>(u.reported_employment);
            t.ovt = u.overtime;
        }
        if (corrections_ != nullptr) {
            t.earn = correct_me(corrections_->earn, t.earn);
            t.emp = correct_me(corrections_->emp, t.emp);
            t.ovt = correct_me(corrections_->ovt, t.ovt);
        }
        return t;
    }

    double earnings(const UnitRecord& u) const {
        double e = use_starred_ ? u.earnings_star : u.earnings;
        if (corrections_ != nullptr) e = correct_me(corrections_->earn, e);
        return e;
    }

private:
    ValueSource(bool use_starred, const MEModels* corrections)
        : use_starred_(use_starred), corrections_(corrections) {}
    bool use_starred_;
    const MEModels* corrections_;
};

struct EstimatorOutput {
    std::string id;
    Totals totals;
    double awe = 0.0;
    std::map<std::string, double> diagnostics;
};

// ---- Building blocks --------------------------------------------------------

// Sum of d * y over the sample (true values; A is measured without error).
Totals ht_total(const PopulationFrame& frame, const WeightedSample& sample);

// (N / N_hat_B) * sum over B of y / pi_hat.
Totals hajek_ipw(const PopulationFrame& frame, std::span<const std::uint32_t> members,
                 const Eigen::VectorXd& pi_hat, double population_size, const ValueSource& source);

double awe_ratio(const Totals& totals);

// Benchmarks for a frame-employment GREG calibration: (count, total frame
// employment) over an arbitrary unit set.
struct CalibBenchmarks {
    double count = 0.0;
    double frame_employment = 0.0;
};
CalibBenchmarks frame_benchmarks(const PopulationFrame& frame,
                                 std::span<const std::uint32_t> units);

// ---- Single-frame estimators ------------------------------------------------

Totals greg_total(const PopulationFrame& frame, const WeightedSample& sample,
                  const CalibBenchmarks& benchmarks,
                  std::map<std::string, double>* diagnostics = nullptr);

// Calibration of the design weights to (N, N_B, Y_B-earnings); the earnings
// benchmark and covariate use B's recorded values.
Totals rdi_total(const PopulationFrame& frame, const WeightedSample& sample, const BigDataset& big,
                 const ValueSource& big_values,
                 std::map<std::string, double>* diagnostics = nullptr);

// Weighted linear fit of y on (1, frame employment) over A; per-variable
// coefficients, used for predictions on any unit.
struct LinearImputer {
    Eigen::Matrix<double, 2, 3> beta;  // column per variable

    Totals predict(const UnitRecord& u) const {
        Totals t;
        const double x = static_cast<double>(u.frame_employment);
        for (int v = 0; v < 3; ++v)
            t.by(static_cast<Variable>(v)) = beta(0, v) + beta(1, v) * x;
        return t;
    }
};
LinearImputer fit_linear_imputer(const PopulationFrame& frame, const WeightedSample& sample);

// Model-assisted difference estimator: sum_B y_hat + sum_A d (y - delta y_hat).
// The model is fitted on A when not supplied.
Totals qr_ma_total(const PopulationFrame& frame, const WeightedSample& sample,
                   std::span<const std::uint32_t> b_members,
                   const LinearImputer* model = nullptr);

// Per-variable weighted regression on B (KW weights) over
// (1, frame employment, industry dummies); predictions for arbitrary units.
struct RegressionImputer {
    Eigen::MatrixXd beta;  // propensity-design columns x 3 variables

    Totals predict(const UnitRecord& u) const;
};
RegressionImputer fit_regression_imputer(const PopulationFrame& frame,
                                         std::span<const std::uint32_t> b_members,
                                         const Eigen::VectorXd& kw_pi_on_b,
                                         const ValueSource& big_values);

// Mass imputation into A: sum_A d y_hat.
Totals mi_total_regression(const PopulationFrame& frame, const WeightedSample& sample,
                           const RegressionImputer& imputer);

// Hot-deck mass imputation within industry x size-group classes, donors drawn
// uniformly with replacement from B; class fallback to size group, then all
// of B. Draws one donor per recipient.
Totals mi_total_hot_deck(const PopulationFrame& frame, const WeightedSample& sample,
                         std::span<const std::uint32_t> b_members, const ValueSource& big_values,
                         Rng& rng, std::map<std::string, double>* diagnostics = nullptr);

enum class DoublyRobustVariant { dr1, dr2 };

// Doubly robust total combining IPW residuals on B with model predictions
// expanded over A; consistent when either the propensities or the predictor
// is right.
using UnitPredictor = std::function<Totals(const UnitRecord&)>;

Totals dr_total(const PopulationFrame& frame, const WeightedSample& sample,
                std::span<const std::uint32_t> b_members, const Eigen::VectorXd& pi_hat_on_b,
                const UnitPredictor& predict, const ValueSource& big_values,
                double population_size, DoublyRobustVariant variant);

Totals dr_total(const PopulationFrame& frame, const WeightedSample& sample,
                std::span<const std::uint32_t> b_members, const Eigen::VectorXd& pi_hat_on_b,
                const RegressionImputer& imputer, const ValueSource& big_values,
                double population_size, DoublyRobustVariant variant);

// ---- Dual-frame (screening) estimators --------------------------------------

// Y_B + HT or calibrated estimate over C from a sample drawn in C.
Totals split_population_total(const PopulationFrame& frame, const WeightedSample& sample_over_c,
                              std::span<const std::uint32_t> b_members,
                              std::span<const std::uint32_t> c_units, bool calibrated,
                              const ValueSource& big_values,
                              std::map<std::string, double>* diagnostics = nullptr);

// ---- Cut-off estimators ------------------------------------------------------

// HT on the cut-off sample plus the raw big-data total inside the excluded
// class.
Totals cutoff_bd_total(const PopulationFrame& frame, const WeightedSample& sample,
                       std::span<const std::uint32_t> excluded, const BigDataset& big,
                       const ValueSource& big_values,
                       std::map<std::string, double>* diagnostics = nullptr);

// Calibrated estimate over the kept frame plus a Hajek-IPW estimate of the
// excluded class from B with frame-model propensities.
Totals cutoff_cal_kwfr_total(const PopulationFrame& frame, const WeightedSample& sample,
                             std::span<const std::uint32_t> kept,
                             std::span<const std::uint32_t> excluded, const BigDataset& big,
                             const PropensityModel& frame_model, const ValueSource& big_values,
                             std::map<std::string, double>* diagnostics = nullptr);

// ---- Big-data-only estimators ------------------------------------------------

// Per-division ratio adjustment on frame employment.
Totals auxdiv_total(const PopulationFrame& frame, std::span<const std::uint32_t> b_members,
                    const ValueSource& big_values,
                    std::map<std::string, double>* diagnostics = nullptr);

}  // namespace survint
