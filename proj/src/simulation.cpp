#include "survint/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "survint/error.hpp"

namespace survint {

const std::map<std::string, EstimatorInfo>& estimator_catalog() {
    static const std::map<std::string, EstimatorInfo> catalog = {
        {"ht", {EstimatorDesign::single, false}},
        {"greg", {EstimatorDesign::single, false}},
        {"rdi", {EstimatorDesign::single, false}},
        {"qr_ma", {EstimatorDesign::single, false}},
        {"kw", {EstimatorDesign::single, false}},
        {"kw_cal", {EstimatorDesign::single, false}},
        {"kw_earn", {EstimatorDesign::single, false}},
        {"alp", {EstimatorDesign::single, false}},
        {"wgt_reg_mi", {EstimatorDesign::single, false}},
        {"dr_wgt", {EstimatorDesign::single, false}},
        {"hd_mi", {EstimatorDesign::single, false}},
        {"kw_cor", {EstimatorDesign::single, true}},
        {"kw_cal_cor", {EstimatorDesign::single, true}},
        {"sp", {EstimatorDesign::dual_screening, false}},
        {"sp_cal", {EstimatorDesign::dual_screening, false}},
        {"co_bd", {EstimatorDesign::cutoff, false}},
        {"co_cal_kwfr", {EstimatorDesign::cutoff, false}},
        {"co_cal_kwfr_cor", {EstimatorDesign::cutoff, true}},
        {"auxdiv", {EstimatorDesign::bigdata_only, false}},
        {"kwfr", {EstimatorDesign::bigdata_only, false}},
        {"kwfr_cor", {EstimatorDesign::bigdata_only, true}},
    };
    return catalog;
}

std::string ScenarioConfig::scenario_id() const {
    std::string id = missingness == Missingness::sar ? "sar" : "snar";
    id += measurement_error ? "_me" : "_no_me";
    return id;
}

SelectionModel ScenarioConfig::selection_model() const {
    if (selection.has_value()) return *selection;
    return missingness == Missingness::sar ? default_sar_model() : default_snar_model();
}

namespace {

bool design_enabled(const std::vector<DesignKind>& designs, DesignKind kind) {
    return std::find(designs.begin(), designs.end(), kind) != designs.end();
}

// Lazily computed per-replicate resource: either a value or the error code of
// the failed computation, shared by every estimator that asks for it.
template <class T>
class Lazy {
public:
    template <class F>
    const T& get(const F& compute) const {
        if (!state_.has_value()) {
            try {
                state_ = State{compute(), {}};
            } catch (const Error& e) {
                state_ = State{std::nullopt, e.code()};
            }
        }
        if (!state_->value.has_value()) throw NumericError(state_->code, "dependency failed");
        return *state_->value;
    }

private:
    struct State {
        std::optional<T> value;
        std::string code;
    };
    mutable std::optional<State> state_;
};

}  // namespace

ScenarioContext::ScenarioContext(const ScenarioConfig& config, const PopulationFrame& frame)
    : config_(config), frame_(&frame) {
    if (frame.size() == 0) throw ConfigError("population-missing", "the population frame is empty");
    if (config_.replicates < 1)
        throw ConfigError("config-invalid", "replicates must be at least 1");
    if (config_.estimators.empty())
        throw ConfigError("config-invalid", "the estimator roster is empty");
    if (config_.missingness == Missingness::snar && config_.selection_model().phi2 == 0.0)
        throw ConfigError("config-invalid", "an outcome-dependent scenario needs phi2 != 0");

    const auto& catalog = estimator_catalog();
    for (const std::string& id : config_.estimators) {
        auto it = catalog.find(id);
        if (it == catalog.end())
            throw ConfigError("config-invalid", "unknown estimator id '" + id + "'");
        const EstimatorInfo& info = it->second;
        const bool needs_single =
            info.design == EstimatorDesign::single || info.needs_measurement_models;
        if (needs_single && !design_enabled(config_.designs, DesignKind::single))
            throw ConfigError("config-invalid",
                              "estimator '" + id + "' needs the single design enabled");
        if (info.design == EstimatorDesign::dual_screening &&
            !design_enabled(config_.designs, DesignKind::dual_screening))
            throw ConfigError("config-invalid",
                              "estimator '" + id + "' needs the dual_screening design enabled");
        if (info.design == EstimatorDesign::cutoff &&
            !design_enabled(config_.designs, DesignKind::cutoff))
            throw ConfigError("config-invalid",
                              "estimator '" + id + "' needs the cutoff design enabled");

        if (id == "kw" || id == "kw_cal" || id == "wgt_reg_mi" || id == "dr_wgt" ||
            id == "kw_cor" || id == "kw_cal_cor")
            needs_kw_ = true;
        if (id == "kw_earn") needs_kw_earn_ = true;
        if (id == "alp") needs_alp_ = true;
        if (id == "kwfr" || id == "kwfr_cor" || id == "co_cal_kwfr" || id == "co_cal_kwfr_cor")
            needs_frame_model_ = true;
        if (info.needs_measurement_models) needs_me_models_ = true;
        if (id == "wgt_reg_mi" || id == "dr_wgt") needs_reg_imputer_ = true;
    }

    for (const UnitRecord& u : frame.units) {
        truth_.earn += u.earnings;
        truth_.emp += static_cast<double>(u.reported_employment);
        truth_.ovt += u.overtime;
    }
    truth_awe_ = awe_ratio(truth_);

    selection_pi_ = selection_probabilities(frame, config_.selection_model());
    all_units_.resize(frame.size());
    for (std::uint32_t i = 0; i < frame.size(); ++i) all_units_[i] = i;

    BethelOptions bethel;
    bethel.min_stratum_n = config_.min_stratum_n;
    if (design_enabled(config_.designs, DesignKind::single)) {
        FixedDesign d;
        d.frames = build_design_frame(frame, nullptr, DesignKind::single);
        d.stratification = stratify(frame, d.frames.sampling);
        d.allocation = bethel_chromy_allocate(d.stratification, config_.constraints, bethel);
        single_ = std::move(d);
    }
    if (design_enabled(config_.designs, DesignKind::cutoff)) {
        FixedDesign d;
        d.frames = build_design_frame(frame, nullptr, DesignKind::cutoff);
        d.stratification = stratify(frame, d.frames.sampling);
        d.allocation = bethel_chromy_allocate(d.stratification, config_.constraints, bethel);
        cutoff_ = std::move(d);
    }
    wants_dual_ = design_enabled(config_.designs, DesignKind::dual_screening);
}

ReplicateResult ScenarioContext::run_replicate(std::uint32_t replicate_index) const {
    const PopulationFrame& frame = *frame_;
    const double population_size = static_cast<double>(frame.size());
    const bool use_starred = config_.read_starred();
    ReplicateResult result;
    result.estimates.resize(config_.estimators.size());

    Rng big_rng(derive_seed(config_.seed, Stream::big_data, replicate_index));
    const BigDataset big = draw_big_dataset(frame, selection_pi_, use_starred, big_rng);

    // Samples per design; the dual frame reallocates against this replicate's B.
    std::optional<WeightedSample> a_single, a_dual, a_cutoff;
    std::optional<DesignFrames> dual_frames;
    if (single_.has_value()) {
        Rng rng(derive_seed(config_.seed, Stream::sample_single, replicate_index));
        a_single = draw_stratified_sample(single_->stratification, single_->allocation, rng);
        link_big_membership(*a_single, big);
        result.realized_sample_size[DesignKind::single] = static_cast<double>(a_single->size());
    }
    if (wants_dual_) {
        dual_frames = build_design_frame(frame, &big, DesignKind::dual_screening);
        Rng rng(derive_seed(config_.seed, Stream::sample_dual, replicate_index));
        if (!dual_frames->sampling.empty()) {
            StratifiedFrame strat = stratify(frame, dual_frames->sampling);
            BethelOptions bethel;
            bethel.min_stratum_n = config_.min_stratum_n;
            Allocation alloc = bethel_chromy_allocate(strat, config_.constraints, bethel);
            a_dual = draw_stratified_sample(strat, alloc, rng);
            link_big_membership(*a_dual, big);
        } else {
            a_dual = WeightedSample{};
        }
        result.realized_sample_size[DesignKind::dual_screening] =
            static_cast<double>(a_dual->size());
    }
    if (cutoff_.has_value()) {
        Rng rng(derive_seed(config_.seed, Stream::sample_cutoff, replicate_index));
        a_cutoff = draw_stratified_sample(cutoff_->stratification, cutoff_->allocation, rng);
        link_big_membership(*a_cutoff, big);
        result.realized_sample_size[DesignKind::cutoff] = static_cast<double>(a_cutoff->size());
    }

    const ValueSource recorded = ValueSource::recorded(use_starred);

    // Shared fitted models, each computed at most once per replicate.
    Lazy<PropensityModel> kw_model, kw_earn_model, alp_model, frame_model;
    Lazy<Eigen::VectorXd> kw_pi, kw_earn_pi, alp_pi, frame_pi;
    Lazy<MEModels> me_models;
    Lazy<RegressionImputer> reg_imputer;
    Lazy<std::vector<double>> b_recorded_earnings;

    auto get_single = [&]() -> const WeightedSample& {
        if (!a_single.has_value())
            throw ConfigError("config-invalid", "estimator needs the single design");
        return *a_single;
    };
    auto require_big = [&]() {
        if (big.n_b == 0) throw NumericError("empty-big-dataset", "no units entered B");
    };
    auto get_kw_pi = [&]() -> const Eigen::VectorXd& {
        return kw_pi.get([&] {
            require_big();
            const PropensityModel& model =
                kw_model.get([&] { return kw_propensities(frame, get_single(), false); });
            return evaluate_propensities(model, frame, big.member_ids);
        });
    };
    auto get_b_earnings = [&]() -> const std::vector<double>& {
        return b_recorded_earnings.get([&] {
            std::vector<double> e(big.member_ids.size());
            for (std::size_t k = 0; k < big.member_ids.size(); ++k)
                e[k] = recorded.earnings(frame.units[big.member_ids[k]]);
            return e;
        });
    };
    auto get_kw_earn_pi = [&]() -> const Eigen::VectorXd& {
        return kw_earn_pi.get([&] {
            require_big();
            const PropensityModel& model = kw_earn_model.get([&] {
                const WeightedSample& a = get_single();
                std::vector<double> a_earnings(a.size());
                for (std::size_t i = 0; i < a.size(); ++i)
                    a_earnings[i] = frame.units[a.unit_index[i]].earnings;  // A is error-free
                return kw_propensities(frame, a, true, a_earnings);
            });
            return evaluate_propensities(model, frame, big.member_ids, get_b_earnings());
        });
    };
    auto get_alp_pi = [&]() -> const Eigen::VectorXd& {
        return alp_pi.get([&] {
            require_big();
            const PropensityModel& model =
                alp_model.get([&] { return alp_propensities(frame, get_single(), big); });
            return evaluate_propensities(model, frame, big.member_ids);
        });
    };
    auto get_frame_model = [&]() -> const PropensityModel& {
        return frame_model.get([&] {
            require_big();
            return frame_propensities(frame, big);
        });
    };
    auto get_frame_pi = [&]() -> const Eigen::VectorXd& {
        return frame_pi.get(
            [&] { return evaluate_propensities(get_frame_model(), frame, big.member_ids); });
    };
    auto get_me_models = [&]() -> const MEModels& {
        return me_models.get([&] {
            const WeightedSample& a = get_single();
            std::vector<double> earn_true, earn_star, emp_true, emp_star, ovt_true, ovt_star;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (!a.delta[i]) continue;
                const UnitRecord& u = frame.units[a.unit_index[i]];
                const Totals y = recorded.values(u);
                earn_true.push_back(u.earnings);
                earn_star.push_back(y.earn);
                emp_true.push_back(static_cast<double>(u.reported_employment));
                emp_star.push_back(y.emp);
                ovt_true.push_back(u.overtime);
                ovt_star.push_back(y.ovt);
            }
            MEModels m;
            m.earn = fit_me_model(earn_true, earn_star);
            m.emp = fit_me_model(emp_true, emp_star);
            m.ovt = fit_me_model(ovt_true, ovt_star);
            return m;
        });
    };
    auto get_reg_imputer = [&]() -> const RegressionImputer& {
        return reg_imputer.get([&] {
            return fit_regression_imputer(frame, big.member_ids, get_kw_pi(), recorded);
        });
    };

    auto kw_cal_totals = [&](const ValueSource& source,
                             std::map<std::string, double>* diagnostics) {
        const Eigen::VectorXd& pi = get_kw_pi();
        CalibrationProblem p;
        p.initial_weights = pi.cwiseInverse();
        p.covariates.resize(static_cast<Eigen::Index>(big.member_ids.size()), 2);
        for (std::size_t k = 0; k < big.member_ids.size(); ++k) {
            p.covariates(static_cast<Eigen::Index>(k), 0) = 1.0;
            p.covariates(static_cast<Eigen::Index>(k), 1) =
                static_cast<double>(frame.units[big.member_ids[k]].frame_employment);
        }
        p.benchmarks.resize(2);
        if (config_.kw_cal_estimated_benchmarks) {
            const WeightedSample& a = get_single();
            double n_hat = 0.0, x_hat = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                n_hat += a.design_weight[i];
                x_hat += a.design_weight[i] *
                         static_cast<double>(frame.units[a.unit_index[i]].frame_employment);
            }
            p.benchmarks << n_hat, x_hat;
        } else {
            CalibBenchmarks b = frame_benchmarks(frame, all_units_);
            p.benchmarks << b.count, b.frame_employment;
        }
        CalibrationResult res = chi_square_calibrate(p);
        if (diagnostics != nullptr && res.negative_weight_count > 0)
            (*diagnostics)["negative_weights"] += res.negative_weight_count;
        Totals t;
        for (std::size_t k = 0; k < big.member_ids.size(); ++k) {
            const Totals y = source.values(frame.units[big.member_ids[k]]);
            const double w = res.weights[static_cast<Eigen::Index>(k)];
            t.earn += w * y.earn;
            t.emp += w * y.emp;
            t.ovt += w * y.ovt;
        }
        return t;
    };

    Rng hot_deck_rng(derive_seed(config_.seed, Stream::hot_deck, replicate_index));

    for (std::size_t e = 0; e < config_.estimators.size(); ++e) {
        const std::string& id = config_.estimators[e];
        ReplicateEstimate& out = result.estimates[e];
        try {
            std::map<std::string, double>* diag = &out.diagnostics;
            if (id == "ht") {
                out.totals = ht_total(frame, get_single());
            } else if (id == "greg") {
                out.totals =
                    greg_total(frame, get_single(), frame_benchmarks(frame, all_units_), diag);
            } else if (id == "rdi") {
                out.totals = rdi_total(frame, get_single(), big, recorded, diag);
            } else if (id == "qr_ma") {
                out.totals = qr_ma_total(frame, get_single(), big.member_ids);
            } else if (id == "kw") {
                require_big();
                out.totals = hajek_ipw(frame, big.member_ids, get_kw_pi(), population_size,
                                       recorded);
            } else if (id == "kw_cal") {
                require_big();
                out.totals = kw_cal_totals(recorded, diag);
            } else if (id == "kw_earn") {
                require_big();
                out.totals = hajek_ipw(frame, big.member_ids, get_kw_earn_pi(), population_size,
                                       recorded);
            } else if (id == "alp") {
                require_big();
                const Eigen::VectorXd& pi = get_alp_pi();
                (*diag)["propensities_above_one"] +=
                    static_cast<double>((pi.array() > 1.0).count());
                out.totals = hajek_ipw(frame, big.member_ids, pi, population_size, recorded);
            } else if (id == "wgt_reg_mi") {
                require_big();
                out.totals = mi_total_regression(frame, get_single(), get_reg_imputer());
            } else if (id == "dr_wgt") {
                require_big();
                out.totals = dr_total(frame, get_single(), big.member_ids, get_kw_pi(),
                                      get_reg_imputer(), recorded, population_size,
                                      DoublyRobustVariant::dr2);
            } else if (id == "hd_mi") {
                out.totals = mi_total_hot_deck(frame, get_single(), big.member_ids, recorded,
                                               hot_deck_rng, diag);
            } else if (id == "kw_cor") {
                require_big();
                const ValueSource corrected =
                    ValueSource::corrected(use_starred, &get_me_models());
                out.totals = hajek_ipw(frame, big.member_ids, get_kw_pi(), population_size,
                                       corrected);
            } else if (id == "kw_cal_cor") {
                require_big();
                const ValueSource corrected =
                    ValueSource::corrected(use_starred, &get_me_models());
                out.totals = kw_cal_totals(corrected, diag);
            } else if (id == "sp" || id == "sp_cal") {
                if (!a_dual.has_value())
                    throw ConfigError("config-invalid", "estimator needs the dual design");
                out.totals = split_population_total(frame, *a_dual, big.member_ids,
                                                    dual_frames->sampling, id == "sp_cal",
                                                    recorded, diag);
            } else if (id == "co_bd") {
                if (!a_cutoff.has_value())
                    throw ConfigError("config-invalid", "estimator needs the cutoff design");
                out.totals = cutoff_bd_total(frame, *a_cutoff, cutoff_->frames.excluded, big,
                                             recorded, diag);
            } else if (id == "co_cal_kwfr" || id == "co_cal_kwfr_cor") {
                if (!a_cutoff.has_value())
                    throw ConfigError("config-invalid", "estimator needs the cutoff design");
                const ValueSource source =
                    id == "co_cal_kwfr_cor"
                        ? ValueSource::corrected(use_starred, &get_me_models())
                        : recorded;
                out.totals = cutoff_cal_kwfr_total(frame, *a_cutoff, cutoff_->frames.sampling,
                                                   cutoff_->frames.excluded, big,
                                                   get_frame_model(), source, diag);
            } else if (id == "auxdiv") {
                out.totals = auxdiv_total(frame, big.member_ids, recorded, diag);
            } else if (id == "kwfr") {
                require_big();
                out.totals = hajek_ipw(frame, big.member_ids, get_frame_pi(), population_size,
                                       recorded);
            } else if (id == "kwfr_cor") {
                require_big();
                const ValueSource corrected =
                    ValueSource::corrected(use_starred, &get_me_models());
                out.totals = hajek_ipw(frame, big.member_ids, get_frame_pi(), population_size,
                                       corrected);
            } else {
                throw ConfigError("config-invalid", "unknown estimator id '" + id + "'");
            }
            out.awe = awe_ratio(out.totals);
        } catch (const Error& err) {
            out.failed = true;
            out.failure_code = err.code();
        }
    }
    return result;
}

ScenarioResult aggregate(const ScenarioConfig& config, const ScenarioContext& context,
                         const std::vector<ReplicateResult>& replicates) {
    const Totals& truth = context.truth();
    for (int v = 0; v < 3; ++v)
        if (!(truth.by(static_cast<Variable>(v)) != 0.0))
            throw NumericError("zero-truth", std::string("population total for ") +
                                                 kVariableNames[static_cast<std::size_t>(v)] +
                                                 " is zero");

    ScenarioResult out;
    out.scenario_id = config.scenario_id();
    out.truth = truth;
    out.truth_awe = context.truth_awe();
    out.replicates = static_cast<std::uint32_t>(replicates.size());

    const auto& catalog = estimator_catalog();
    out.estimators.resize(config.estimators.size());
    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
        EstimatorSummary& summary = out.estimators[e];
        summary.id = config.estimators[e];
        summary.design = catalog.at(summary.id).design;
        const double truths[4] = {truth.earn, truth.emp, truth.ovt, context.truth_awe()};
        for (int v = 0; v < 4; ++v) {
            double sum_err = 0.0, sum_sq = 0.0;
            std::uint32_t used = 0, failures = 0;
            for (const ReplicateResult& rep : replicates) {
                const ReplicateEstimate& est = rep.estimates[e];
                double value = 0.0;
                bool ok = !est.failed;
                if (ok) {
                    value = v < 3 ? est.totals.by(static_cast<Variable>(v)) : est.awe;
                    ok = std::isfinite(value);
                }
                if (!ok) {
                    ++failures;
                    continue;
                }
                const double err = (value - truths[v]) / truths[v];
                sum_err += err;
                sum_sq += err * err;
                ++used;
            }
            CellStats& cell = summary.by_variable[static_cast<std::size_t>(v)];
            cell.n_used = used;
            cell.n_failures = failures;
            if (used > 0) {
                cell.rb = sum_err / used;
                cell.rrmse = std::sqrt(sum_sq / used);
            }
        }
        for (const ReplicateResult& rep : replicates)
            for (const auto& [key, value] : rep.estimates[e].diagnostics)
                summary.diagnostics[key] += value;
    }

    for (const ReplicateResult& rep : replicates)
        for (const auto& [design, n] : rep.realized_sample_size)
            out.mean_sample_size[design] += n / static_cast<double>(replicates.size());
    return out;
}

ScenarioResult run_scenario(const ScenarioConfig& config, const PopulationFrame& frame,
                            std::uint32_t threads) {
    ScenarioContext context(config, frame);
    std::vector<ReplicateResult> results(config.replicates);

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<std::uint32_t>(threads, config.replicates);
    if (threads <= 1) {
        for (std::uint32_t r = 0; r < config.replicates; ++r)
            results[r] = context.run_replicate(r);
    } else {
        std::atomic<std::uint32_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (std::uint32_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    while (true) {
                        const std::uint32_t r = next.fetch_add(1);
                        if (r >= config.replicates) break;
                        results[r] = context.run_replicate(r);
                    }
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& err : errors)
            if (err) std::rethrow_exception(err);
    }
    return aggregate(config, context, results);
}

}  // namespace survint
