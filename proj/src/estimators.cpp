#include "survint/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "survint/error.hpp"

namespace survint {

Totals ht_total(const PopulationFrame& frame, const WeightedSample& sample) {
    Totals t;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const UnitRecord& u = frame.units[sample.unit_index[i]];
        const double d = sample.design_weight[i];
        t.earn += d * u.earnings;
        t.emp += d * static_cast<double>(u.reported_employment);
        t.ovt += d * u.overtime;
    }
    return t;
}

Totals hajek_ipw(const PopulationFrame& frame, std::span<const std::uint32_t> members,
                 const Eigen::VectorXd& pi_hat, double population_size,
                 const ValueSource& source) {
    if (static_cast<std::size_t>(pi_hat.size()) != members.size())
        throw ConfigError("invalid-propensities", "propensity vector must align with B");
    double n_hat = 0.0;
    Totals acc;
    for (std::size_t k = 0; k < members.size(); ++k) {
        const double pi = pi_hat[static_cast<Eigen::Index>(k)];
        if (!(pi > 0.0))
            throw NumericError("zero-propensity",
                               "estimated propensity must be positive for every member of B");
        const double w = 1.0 / pi;
        n_hat += w;
        Totals y = source.values(frame.units[members[k]]);
        acc.earn += w * y.earn;
        acc.emp += w * y.emp;
        acc.ovt += w * y.ovt;
    }
    if (n_hat == 0.0) return acc;  // empty B contributes nothing
    const double scale = population_size / n_hat;
    acc.earn *= scale;
    acc.emp *= scale;
    acc.ovt *= scale;
    return acc;
}

double awe_ratio(const Totals& totals) {
    if (!(totals.emp > 0.0))
        throw NumericError("zero-denominator", "employment total must be positive for the ratio");
    return totals.earn / totals.emp;
}

CalibBenchmarks frame_benchmarks(const PopulationFrame& frame,
                                 std::span<const std::uint32_t> units) {
    CalibBenchmarks b;
    b.count = static_cast<double>(units.size());
    for (std::uint32_t i : units)
        b.frame_employment += static_cast<double>(frame.units[i].frame_employment);
    return b;
}

namespace {

Totals weighted_totals(const PopulationFrame& frame, const WeightedSample& sample,
                       const Eigen::VectorXd& weights) {
    Totals t;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const UnitRecord& u = frame.units[sample.unit_index[i]];
        const double w = weights[static_cast<Eigen::Index>(i)];
        t.earn += w * u.earnings;
        t.emp += w * static_cast<double>(u.reported_employment);
        t.ovt += w * u.overtime;
    }
    return t;
}

Eigen::VectorXd design_weight_vector(const WeightedSample& sample) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(sample.size()));
    for (std::size_t i = 0; i < sample.size(); ++i)
        d[static_cast<Eigen::Index>(i)] = sample.design_weight[i];
    return d;
}

void record_negative_weights(std::map<std::string, double>* diagnostics, int count) {
    if (diagnostics != nullptr && count > 0)
        (*diagnostics)["negative_weights"] += static_cast<double>(count);
}

}  // namespace

Totals greg_total(const PopulationFrame& frame, const WeightedSample& sample,
                  const CalibBenchmarks& benchmarks, std::map<std::string, double>* diagnostics) {
    CalibrationProblem p;
    p.initial_weights = design_weight_vector(sample);
    p.covariates.resize(static_cast<Eigen::Index>(sample.size()), 2);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        p.covariates(static_cast<Eigen::Index>(i), 0) = 1.0;
        p.covariates(static_cast<Eigen::Index>(i), 1) =
            static_cast<double>(frame.units[sample.unit_index[i]].frame_employment);
    }
    p.benchmarks.resize(2);
    p.benchmarks << benchmarks.count, benchmarks.frame_employment;
    CalibrationResult res = chi_square_calibrate(p);
    record_negative_weights(diagnostics, res.negative_weight_count);
    return weighted_totals(frame, sample, res.weights);
}

Totals rdi_total(const PopulationFrame& frame, const WeightedSample& sample, const BigDataset& big,
                 const ValueSource& big_values, std::map<std::string, double>* diagnostics) {
    if (sample.delta.size() != sample.size())
        throw ConfigError("invalid-sample", "sample must be linked to B before RDI");
    double y_b = 0.0;
    for (std::uint32_t k : big.member_ids) y_b += big_values.earnings(frame.units[k]);

    Eigen::MatrixXd full(static_cast<Eigen::Index>(sample.size()), 3);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const UnitRecord& u = frame.units[sample.unit_index[i]];
        const double delta = sample.delta[i];
        full(static_cast<Eigen::Index>(i), 0) = 1.0;
        full(static_cast<Eigen::Index>(i), 1) = delta;
        full(static_cast<Eigen::Index>(i), 2) = delta != 0.0 ? big_values.earnings(u) : 0.0;
    }
    Eigen::Vector3d full_benchmarks(static_cast<double>(frame.size()),
                                    static_cast<double>(big.n_b), y_b);

    // With no linked units a benchmark column vanishes; keep the consistent
    // zero-benchmark constraints out of the system (B empty reduces to the
    // count calibration).
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < 3; ++j) {
        const bool zero_col = full.col(j).cwiseAbs().maxCoeff() == 0.0;
        if (zero_col && full_benchmarks[j] != 0.0)
            throw NumericError("singular-system",
                               "RDI benchmark " + std::to_string(j) +
                                   " is nonzero but its covariate vanishes on A");
        if (!zero_col) keep.push_back(j);
    }
    CalibrationProblem p;
    p.initial_weights = design_weight_vector(sample);
    p.covariates.resize(full.rows(), static_cast<Eigen::Index>(keep.size()));
    p.benchmarks.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        p.covariates.col(static_cast<Eigen::Index>(j)) = full.col(keep[j]);
        p.benchmarks[static_cast<Eigen::Index>(j)] = full_benchmarks[keep[j]];
    }
    CalibrationResult res = chi_square_calibrate(p);
    record_negative_weights(diagnostics, res.negative_weight_count);
    return weighted_totals(frame, sample, res.weights);
}

LinearImputer fit_linear_imputer(const PopulationFrame& frame, const WeightedSample& sample) {
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    Eigen::Matrix<double, 2, 3> rhs = Eigen::Matrix<double, 2, 3>::Zero();
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const UnitRecord& u = frame.units[sample.unit_index[i]];
        const double d = sample.design_weight[i];
        const double x = static_cast<double>(u.frame_employment);
        m(0, 0) += d;
        m(0, 1) += d * x;
        m(1, 1) += d * x * x;
        const double ys[3] = {u.earnings, static_cast<double>(u.reported_employment), u.overtime};
        for (int v = 0; v < 3; ++v) {
            rhs(0, v) += d * ys[v];
            rhs(1, v) += d * x * ys[v];
        }
    }
    m(1, 0) = m(0, 1);
    Eigen::FullPivLU<Eigen::Matrix2d> lu(m);
    if (lu.rank() < 2)
        throw NumericError("singular-model",
                           "frame employment is constant in A; the working model is singular");
    LinearImputer imp;
    imp.beta = lu.solve(rhs);
    return imp;
}

Totals qr_ma_total(const PopulationFrame& frame, const WeightedSample& sample,
                   std::span<const std::uint32_t> b_members, const LinearImputer* model) {
    LinearImputer fitted;
    if (model == nullptr) {
        fitted = fit_linear_imputer(frame, sample);
        model = &fitted;
    }
    Totals t;
    for (std::uint32_t k : b_members) t += model->predict(frame.units[k]);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const UnitRecord& u = frame.units[sample.unit_index[i]];
        const double d = sample.design_weight[i];
        const Totals pred = model->predict(u);
        const double delta = sample.delta.empty() ? 0.0 : sample.delta[i];
        t.earn += d * (u.earnings - delta * pred.earn);
        t.emp += d * (static_cast<double>(u.reported_employment) - delta * pred.emp);
        t.ovt += d * (u.overtime - delta * pred.ovt);
    }
    return t;
}

Totals RegressionImputer::predict(const UnitRecord& u) const {
    Totals t;
    for (int v = 0; v < 3; ++v) {
        double eta = beta(0, v) + beta(1, v) * static_cast<double>(u.frame_employment);
        if (u.industry > 0) eta += beta(1 + u.industry, v);
        t.by(static_cast<Variable>(v)) = eta;
    }
    return t;
}

RegressionImputer fit_regression_imputer(const PopulationFrame& frame,
                                         std::span<const std::uint32_t> b_members,
                                         const Eigen::VectorXd& kw_pi_on_b,
                                         const ValueSource& big_values) {
    if (static_cast<std::size_t>(kw_pi_on_b.size()) != b_members.size())
        throw ConfigError("invalid-propensities", "propensity vector must align with B");
    const int p = propensity_design_columns(false);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(p, 3);
    Eigen::VectorXd row(p);
    for (std::size_t k = 0; k < b_members.size(); ++k) {
        const UnitRecord& u = frame.units[b_members[k]];
        const double pi = kw_pi_on_b[static_cast<Eigen::Index>(k)];
        if (!(pi > 0.0))
            throw NumericError("zero-propensity", "imputation weights need positive propensities");
        const double w = 1.0 / pi;
        row.setZero();
        row[0] = 1.0;
        row[1] = static_cast<double>(u.frame_employment);
        if (u.industry > 0) row[1 + u.industry] = 1.0;
        m.noalias() += w * row * row.transpose();
        const Totals y = big_values.values(u);
        for (int v = 0; v < 3; ++v) rhs.col(v) += w * row * y.by(static_cast<Variable>(v));
    }
    // Industries absent from B get a zero coefficient (baseline prediction).
    for (int j = 0; j < p; ++j)
        if (m(j, j) == 0.0) m(j, j) = 1.0;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    RegressionImputer imp;
    imp.beta = ldlt.solve(rhs);
    if (!imp.beta.allFinite())
        throw NumericError("singular-model", "the weighted imputation model is singular");
    return imp;
}

Totals mi_total_regression(const PopulationFrame& frame, const WeightedSample& sample,
                           const RegressionImputer& imputer) {
    Totals t;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const Totals pred = imputer.predict(frame.units[sample.unit_index[i]]);
        const double d = sample.design_weight[i];
        t.earn += d * pred.earn;
        t.emp += d * pred.emp;
        t.ovt += d * pred.ovt;
    }
    return t;
}

Totals mi_total_hot_deck(const PopulationFrame& frame, const WeightedSample& sample,
                         std::span<const std::uint32_t> b_members, const ValueSource& big_values,
                         Rng& rng, std::map<std::string, double>* diagnostics) {
    if (b_members.empty())
        throw NumericError("empty-donor-class", "hot deck needs at least one donor in B");
    // Donor pools: industry x size group, then size group, then the whole of
    // B. The fine size groups keep the donor distribution close to the
    // recipients'; the wide design bands would mix sizes that B covers at
    // very different rates.
    std::array<std::vector<std::uint32_t>, kNumIndustries * kNumSizeGroups> by_class;
    std::array<std::vector<std::uint32_t>, kNumSizeGroups> by_group;
    for (std::uint32_t k : b_members) {
        const UnitRecord& u = frame.units[k];
        by_class[static_cast<std::size_t>(u.industry * kNumSizeGroups + u.size_group)].push_back(k);
        by_group[u.size_group].push_back(k);
    }
    double fallbacks = 0.0;
    Totals t;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const UnitRecord& u = frame.units[sample.unit_index[i]];
        const auto& pool_class =
            by_class[static_cast<std::size_t>(u.industry * kNumSizeGroups + u.size_group)];
        const auto& pool_group = by_group[u.size_group];
        std::span<const std::uint32_t> pool(pool_class);
        if (pool.empty()) {
            pool = std::span<const std::uint32_t>(pool_group);
            fallbacks += 1.0;
        }
        if (pool.empty()) pool = b_members;
        const std::uint32_t donor = pool[rng.below(pool.size())];
        const Totals y = big_values.values(frame.units[donor]);
        const double d = sample.design_weight[i];
        t.earn += d * y.earn;
        t.emp += d * y.emp;
        t.ovt += d * y.ovt;
    }
    if (diagnostics != nullptr && fallbacks > 0) (*diagnostics)["hot_deck_fallbacks"] += fallbacks;
    return t;
}

Totals dr_total(const PopulationFrame& frame, const WeightedSample& sample,
                std::span<const std::uint32_t> b_members, const Eigen::VectorXd& pi_hat_on_b,
                const UnitPredictor& predict, const ValueSource& big_values,
                double population_size, DoublyRobustVariant variant) {
    if (static_cast<std::size_t>(pi_hat_on_b.size()) != b_members.size())
        throw ConfigError("invalid-propensities", "propensity vector must align with B");
    Totals residual_term;
    double n_hat_b = 0.0;
    for (std::size_t k = 0; k < b_members.size(); ++k) {
        const UnitRecord& u = frame.units[b_members[k]];
        const double pi = pi_hat_on_b[static_cast<Eigen::Index>(k)];
        if (!(pi > 0.0))
            throw NumericError("zero-propensity", "doubly robust weights need positive propensities");
        const double w = 1.0 / pi;
        n_hat_b += w;
        const Totals y = big_values.values(u);
        const Totals pred = predict(u);
        residual_term.earn += w * (y.earn - pred.earn);
        residual_term.emp += w * (y.emp - pred.emp);
        residual_term.ovt += w * (y.ovt - pred.ovt);
    }
    Totals model_term;
    double n_hat_a = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double d = sample.design_weight[i];
        n_hat_a += d;
        const Totals pred = predict(frame.units[sample.unit_index[i]]);
        model_term.earn += d * pred.earn;
        model_term.emp += d * pred.emp;
        model_term.ovt += d * pred.ovt;
    }
    const double norm_b = variant == DoublyRobustVariant::dr1 ? population_size
                                                              : (n_hat_b > 0 ? n_hat_b : 1.0);
    const double norm_a =
        variant == DoublyRobustVariant::dr1 ? population_size : (n_hat_a > 0 ? n_hat_a : 1.0);
    Totals t;
    t.earn = population_size * (residual_term.earn / norm_b + model_term.earn / norm_a);
    t.emp = population_size * (residual_term.emp / norm_b + model_term.emp / norm_a);
    t.ovt = population_size * (residual_term.ovt / norm_b + model_term.ovt / norm_a);
    return t;
}

Totals dr_total(const PopulationFrame& frame, const WeightedSample& sample,
                std::span<const std::uint32_t> b_members, const Eigen::VectorXd& pi_hat_on_b,
                const RegressionImputer& imputer, const ValueSource& big_values,
                double population_size, DoublyRobustVariant variant) {
    return dr_total(frame, sample, b_members, pi_hat_on_b,
                    [&imputer](const UnitRecord& u) { return imputer.predict(u); }, big_values,
                    population_size, variant);
}

Totals split_population_total(const PopulationFrame& frame, const WeightedSample& sample_over_c,
                              std::span<const std::uint32_t> b_members,
                              std::span<const std::uint32_t> c_units, bool calibrated,
                              const ValueSource& big_values,
                              std::map<std::string, double>* diagnostics) {
    Totals t;
    for (std::uint32_t k : b_members) t += big_values.values(frame.units[k]);
    if (c_units.empty()) return t;  // B covered everything
    if (calibrated) {
        t += greg_total(frame, sample_over_c, frame_benchmarks(frame, c_units), diagnostics);
    } else {
        t += ht_total(frame, sample_over_c);
    }
    return t;
}

Totals cutoff_bd_total(const PopulationFrame& frame, const WeightedSample& sample,
                       std::span<const std::uint32_t> excluded, const BigDataset& big,
                       const ValueSource& big_values, std::map<std::string, double>* diagnostics) {
    Totals t = ht_total(frame, sample);
    double covered = 0.0;
    for (std::uint32_t k : excluded) {
        if (!big.delta[k]) continue;
        covered += 1.0;
        t += big_values.values(frame.units[k]);
    }
    if (diagnostics != nullptr && !excluded.empty() && covered == 0.0)
        (*diagnostics)["empty_takenone_overlap"] += 1.0;
    return t;
}

Totals cutoff_cal_kwfr_total(const PopulationFrame& frame, const WeightedSample& sample,
                             std::span<const std::uint32_t> kept,
                             std::span<const std::uint32_t> excluded, const BigDataset& big,
                             const PropensityModel& frame_model, const ValueSource& big_values,
                             std::map<std::string, double>* diagnostics) {
    Totals t;
    if (!kept.empty())
        t = greg_total(frame, sample, frame_benchmarks(frame, kept), diagnostics);
    std::vector<std::uint32_t> b_in_excluded;
    for (std::uint32_t k : excluded)
        if (big.delta[k]) b_in_excluded.push_back(k);
    if (excluded.empty()) return t;
    if (b_in_excluded.empty()) {
        if (diagnostics != nullptr) (*diagnostics)["empty_takenone_overlap"] += 1.0;
        return t;
    }
    Eigen::VectorXd pi = evaluate_propensities(frame_model, frame, b_in_excluded);
    t += hajek_ipw(frame, b_in_excluded, pi, static_cast<double>(excluded.size()), big_values);
    return t;
}

Totals auxdiv_total(const PopulationFrame& frame, std::span<const std::uint32_t> b_members,
                    const ValueSource& big_values, std::map<std::string, double>* diagnostics) {
    std::array<double, kNumIndustries> x_pop{}, x_b{};
    std::array<Totals, kNumIndustries> y_b{};
    std::array<bool, kNumIndustries> division_in_b{};
    for (const UnitRecord& u : frame.units)
        x_pop[u.industry] += static_cast<double>(u.frame_employment);
    for (std::uint32_t k : b_members) {
        const UnitRecord& u = frame.units[k];
        x_b[u.industry] += static_cast<double>(u.frame_employment);
        y_b[u.industry] += big_values.values(u);
        division_in_b[u.industry] = true;
    }
    Totals t;
    for (int d = 0; d < kNumIndustries; ++d) {
        if (!division_in_b[static_cast<std::size_t>(d)]) {
            if (x_pop[static_cast<std::size_t>(d)] > 0.0 && diagnostics != nullptr)
                (*diagnostics)["auxdiv_missing_divisions"] += 1.0;
            continue;
        }
        if (!(x_b[static_cast<std::size_t>(d)] > 0.0))
            throw NumericError("zero-division-denominator",
                               std::string("division ") + industry_letter(d) +
                                   " has B members but zero frame employment in B");
        const double factor =
            x_pop[static_cast<std::size_t>(d)] / x_b[static_cast<std::size_t>(d)];
        t.earn += factor * y_b[static_cast<std::size_t>(d)].earn;
        t.emp += factor * y_b[static_cast<std::size_t>(d)].emp;
        t.ovt += factor * y_b[static_cast<std::size_t>(d)].ovt;
    }
    return t;
}

}  // namespace survint
