#include "survint/weighting.hpp"

#include <algorithm>
#include <cmath>

#include "survint/error.hpp"

namespace survint {

namespace {

double inverse_logit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

}  // namespace

CalibrationResult chi_square_calibrate(const CalibrationProblem& problem) {
    const Eigen::Index n = problem.initial_weights.size();
    const Eigen::Index p = problem.covariates.cols();
    if (problem.covariates.rows() != n)
        throw ConfigError("invalid-calibration", "covariate rows must match the weight vector");
    if (problem.benchmarks.size() != p)
        throw ConfigError("invalid-calibration", "benchmark length must match covariate columns");
    Eigen::VectorXd q = problem.tuning;
    if (q.size() == 0) q = Eigen::VectorXd::Ones(n);
    if (q.size() != n)
        throw ConfigError("invalid-calibration", "tuning vector must match the weight vector");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(problem.initial_weights[i] > 0.0))
            throw NumericError("invalid-weights", "initial weights must be strictly positive");
        if (!(q[i] > 0.0))
            throw NumericError("invalid-weights", "tuning constants must be strictly positive");
    }

    const Eigen::VectorXd dq = problem.initial_weights.cwiseProduct(q);
    const Eigen::MatrixXd m = problem.covariates.transpose() * dq.asDiagonal() * problem.covariates;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    lu.setThreshold(1e-12);
    if (lu.rank() < p) {
        const auto& perm = lu.permutationQ().indices();
        const Eigen::Index offending = perm[p - 1];
        throw NumericError("singular-system",
                           "benchmark system is rank deficient; covariate dimension " +
                               std::to_string(offending) + " is linearly dependent");
    }

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd weights;
    const double scale = 1.0 + problem.benchmarks.norm();
    for (int pass = 0; pass < 4; ++pass) {
        weights = problem.initial_weights.array() *
                  (1.0 + (q.array() * (problem.covariates * lambda).array()));
        const Eigen::VectorXd residual =
            problem.benchmarks - problem.covariates.transpose() * weights;
        if (residual.norm() <= 1e-10 * scale) break;
        lambda += lu.solve(residual);
    }
    weights = problem.initial_weights.array() *
              (1.0 + (q.array() * (problem.covariates * lambda).array()));
    const double residual =
        (problem.benchmarks - problem.covariates.transpose() * weights).norm();
    if (residual > 1e-8 * scale)
        throw NumericError("calibration-residual",
                           "constraint residual " + std::to_string(residual) +
                               " exceeds tolerance");

    CalibrationResult out;
    out.weights = std::move(weights);
    out.multipliers = std::move(lambda);
    out.negative_weight_count =
        static_cast<int>((out.weights.array() < 0.0).count());
    return out;
}

LogisticFit fit_logistic_weighted(const Eigen::VectorXd& response, const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& case_weights,
                                  const LogisticOptions& options) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (response.size() != n || case_weights.size() != n)
        throw ConfigError("invalid-logistic", "response/weights must match the design rows");

    double total_weight = 0.0, weighted_response = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(case_weights[i] >= 0.0))
            throw NumericError("invalid-weights", "case weights must be nonnegative");
        if (response[i] != 0.0 && response[i] != 1.0)
            throw ConfigError("invalid-logistic", "responses must be 0 or 1");
        total_weight += case_weights[i];
        weighted_response += case_weights[i] * response[i];
    }
    if (!(total_weight > 0.0))
        throw NumericError("invalid-weights", "total case weight must be positive");
    if (weighted_response <= 0.0 || weighted_response >= total_weight)
        throw NumericError("separation-detected",
                           "all weighted responses fall on one side; the likelihood is unbounded");

    // Per-column gradient scale for the stopping rule.
    Eigen::VectorXd col_scale(p);
    for (Eigen::Index j = 0; j < p; ++j)
        col_scale[j] = std::max(1.0, design.col(j).cwiseAbs().maxCoeff());

    auto log_likelihood = [&](const Eigen::VectorXd& eta) {
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            // log p = -log(1+e^-eta), log(1-p) = -eta - log(1+e^-eta)
            const double soft = eta[i] > 0 ? eta[i] + std::log1p(std::exp(-eta[i]))
                                           : std::log1p(std::exp(eta[i]));
            ll += case_weights[i] * (response[i] * eta[i] - soft);
        }
        return ll;
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    double ll = log_likelihood(eta);
    LogisticFit fit;

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        Eigen::VectorXd prob(n), irls_w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            prob[i] = inverse_logit(eta[i]);
            irls_w[i] = case_weights[i] * prob[i] * (1.0 - prob[i]);
        }
        const Eigen::VectorXd gradient =
            design.transpose() * (case_weights.cwiseProduct(response - prob));

        bool converged = true;
        for (Eigen::Index j = 0; j < p; ++j)
            if (std::abs(gradient[j]) > options.tolerance * (1.0 + total_weight * col_scale[j]))
                converged = false;
        fit.gradient_norm = gradient.cwiseAbs().maxCoeff();
        if (converged) {
            fit.beta = beta;
            fit.iterations = iter - 1;
            return fit;
        }

        const Eigen::MatrixXd hessian = design.transpose() * irls_w.asDiagonal() * design;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
        Eigen::VectorXd step = ldlt.solve(gradient);
        if (!step.allFinite())
            throw NumericError("singular-design",
                               "information matrix is singular; drop collinear covariates");

        double t = 1.0;
        bool improved = false;
        for (int half = 0; half < 40; ++half) {
            const Eigen::VectorXd trial_beta = beta + t * step;
            const Eigen::VectorXd trial_eta = design * trial_beta;
            const double trial_ll = log_likelihood(trial_eta);
            if (std::isfinite(trial_ll) && trial_ll >= ll - 1e-12 * (1.0 + std::abs(ll))) {
                beta = trial_beta;
                eta = trial_eta;
                ll = trial_ll;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if (!improved)
            throw NumericError("no-convergence", "line search failed to improve the likelihood");
        if (eta.cwiseAbs().maxCoeff() > 100.0)
            throw NumericError("separation-detected",
                               "fitted log odds diverged; responses are separable");
    }
    throw NumericError("no-convergence", "logistic fit did not converge within " +
                                             std::to_string(options.max_iterations) +
                                             " iterations");
}

// ---- Propensity models ------------------------------------------------------

int propensity_design_columns(bool with_log_earnings) {
    return 2 + (kNumIndustries - 1) + (with_log_earnings ? 1 : 0);
}

namespace {

void fill_propensity_row(Eigen::MatrixXd& m, Eigen::Index row, const UnitRecord& u,
                         bool with_log, double earnings_for_log) {
    m(row, 0) = 1.0;
    m(row, 1) = static_cast<double>(u.frame_employment);
    for (int d = 1; d < kNumIndustries; ++d) m(row, 1 + d) = u.industry == d ? 1.0 : 0.0;
    if (with_log) m(row, propensity_design_columns(true) - 1) = log_earnings(earnings_for_log);
}

// Fits on the subset of columns with any variation; re-expands coefficients
// with zeros so evaluation works for units outside the fitted support.
PropensityModel fit_propensity(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                               const Eigen::VectorXd& weights, PropensityKind kind,
                               bool with_log) {
    const Eigen::Index p = design.cols();
    std::vector<Eigen::Index> keep;
    keep.push_back(0);
    for (Eigen::Index j = 1; j < p; ++j) {
        const double lo = design.col(j).minCoeff();
        const double hi = design.col(j).maxCoeff();
        if (hi > lo) keep.push_back(j);
    }
    Eigen::MatrixXd reduced(design.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) reduced.col(static_cast<Eigen::Index>(k)) = design.col(keep[k]);

    LogisticFit fit = fit_logistic_weighted(response, reduced, weights);

    PropensityModel model;
    model.kind = kind;
    model.with_log_earnings = with_log;
    model.beta = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k < keep.size(); ++k) model.beta[keep[k]] = fit.beta[static_cast<Eigen::Index>(k)];
    return model;
}

}  // namespace

Eigen::MatrixXd propensity_design(const PopulationFrame& frame,
                                  std::span<const std::uint32_t> units, bool with_log_earnings,
                                  std::span<const double> earnings_for_log) {
    if (with_log_earnings && earnings_for_log.size() != units.size())
        throw ConfigError("invalid-propensity-design",
                          "earnings values must align with the unit list");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(units.size()),
                                              propensity_design_columns(with_log_earnings));
    for (std::size_t i = 0; i < units.size(); ++i)
        fill_propensity_row(m, static_cast<Eigen::Index>(i), frame.units[units[i]],
                            with_log_earnings, with_log_earnings ? earnings_for_log[i] : 0.0);
    return m;
}

double PropensityModel::linear_predictor(const UnitRecord& u, double earnings_for_log) const {
    double eta = beta[0] + beta[1] * static_cast<double>(u.frame_employment);
    if (u.industry > 0) eta += beta[1 + u.industry];
    if (with_log_earnings) eta += beta[beta.size() - 1] * log_earnings(earnings_for_log);
    return eta;
}

double PropensityModel::propensity(const UnitRecord& u, double earnings_for_log) const {
    const double eta = linear_predictor(u, earnings_for_log);
    return kind == PropensityKind::adjusted_logistic ? std::exp(eta) : inverse_logit(eta);
}

PropensityModel kw_propensities(const PopulationFrame& frame, const WeightedSample& a,
                                bool with_log_earnings,
                                std::span<const double> earnings_for_log) {
    if (a.delta.size() != a.size())
        throw ConfigError("invalid-sample", "sample must be linked to B before the KW fit");
    Eigen::MatrixXd design = propensity_design(frame, a.unit_index, with_log_earnings,
                                               earnings_for_log);
    Eigen::VectorXd response(static_cast<Eigen::Index>(a.size()));
    Eigen::VectorXd weights(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        response[static_cast<Eigen::Index>(i)] = a.delta[i];
        weights[static_cast<Eigen::Index>(i)] = a.design_weight[i];
    }
    return fit_propensity(design, response, weights, PropensityKind::kim_wang, with_log_earnings);
}

PropensityModel alp_propensities(const PopulationFrame& frame, const WeightedSample& a,
                                 const BigDataset& big) {
    const Eigen::Index nb = static_cast<Eigen::Index>(big.member_ids.size());
    const Eigen::Index na = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd design(nb + na, propensity_design_columns(false));
    Eigen::VectorXd response(nb + na), weights(nb + na);
    for (Eigen::Index i = 0; i < nb; ++i) {
        fill_propensity_row(design, i, frame.units[big.member_ids[static_cast<std::size_t>(i)]],
                            false, 0.0);
        response[i] = 1.0;
        weights[i] = 1.0;
    }
    for (Eigen::Index i = 0; i < na; ++i) {
        fill_propensity_row(design, nb + i, frame.units[a.unit_index[static_cast<std::size_t>(i)]],
                            false, 0.0);
        response[nb + i] = 0.0;
        weights[nb + i] = a.design_weight[static_cast<std::size_t>(i)];
    }
    return fit_propensity(design, response, weights, PropensityKind::adjusted_logistic, false);
}

PropensityModel frame_propensities(const PopulationFrame& frame, const BigDataset& big) {
    if (big.delta.size() != frame.size())
        throw ConfigError("invalid-sample", "membership indicators must cover the frame");
    Eigen::MatrixXd design =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(frame.size()),
                              propensity_design_columns(false));
    Eigen::VectorXd response(static_cast<Eigen::Index>(frame.size()));
    for (std::size_t i = 0; i < frame.size(); ++i) {
        fill_propensity_row(design, static_cast<Eigen::Index>(i), frame.units[i], false, 0.0);
        response[static_cast<Eigen::Index>(i)] = big.delta[i];
    }
    const Eigen::VectorXd weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(frame.size()));
    return fit_propensity(design, response, weights, PropensityKind::frame_logistic, false);
}

Eigen::VectorXd evaluate_propensities(const PropensityModel& model, const PopulationFrame& frame,
                                      std::span<const std::uint32_t> units,
                                      std::span<const double> earnings_for_log) {
    if (model.with_log_earnings && earnings_for_log.size() != units.size())
        throw ConfigError("invalid-propensity-design",
                          "earnings values must align with the unit list");
    Eigen::VectorXd out(static_cast<Eigen::Index>(units.size()));
    for (std::size_t i = 0; i < units.size(); ++i)
        out[static_cast<Eigen::Index>(i)] =
            model.propensity(frame.units[units[i]],
                             model.with_log_earnings ? earnings_for_log[i] : 0.0);
    return out;
}

MEModel fit_me_model(std::span<const double> y_true, std::span<const double> y_star) {
    if (y_true.size() != y_star.size())
        throw ConfigError("invalid-me-fit", "paired samples must have equal length");
    const std::size_t n = y_true.size();
    if (n < 3)
        throw NumericError("overlap-too-small",
                           "measurement-error fit needs at least 3 linked units, got " +
                               std::to_string(n));
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += y_true[i];
        sy += y_star[i];
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (y_true[i] - mx) * (y_true[i] - mx);
        sxy += (y_true[i] - mx) * (y_star[i] - my);
    }
    if (!(sxx > 0.0))
        throw NumericError("degenerate-fit", "true values have zero variance in the overlap");
    MEModel model;
    model.beta1 = sxy / sxx;
    model.beta0 = my - model.beta1 * mx;
    if (std::abs(model.beta1) < 1e-12)
        throw NumericError("degenerate-fit", "fitted slope is numerically zero");
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y_star[i] - model.beta0 - model.beta1 * y_true[i];
        rss += e * e;
    }
    model.residual_variance = n > 2 ? rss / static_cast<double>(n - 2) : 0.0;
    model.n_fit = n;
    return model;
}

}  // namespace survint
