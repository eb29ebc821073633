// Acceptance suite: runs every exit criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "survint/config.hpp"
#include "survint/design.hpp"
#include "survint/error.hpp"
#include "survint/estimators.hpp"
#include "survint/population.hpp"
#include "survint/report.hpp"
#include "survint/simulation.hpp"
#include "test_support.hpp"

using namespace survint;

namespace {

int g_failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
    char buf[1024];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------------------
// C1: moment fidelity of the employment-pair generator, every parameter row.

void criterion_1() {
    using test_support::batched_estimate;
    using test_support::sample_covariance;
    using test_support::sample_moments;
    using test_support::within_3se;

    const PopulationConfig defaults = default_population_config();
    bool all_ok = true;
    std::string first_failure;
    double worst_seconds = 0.0;
    for (int g = 0; g < kNumSizeGroups; ++g) {
        const PairSpec& spec = defaults.moments[static_cast<std::size_t>(g)];
        const auto start = std::chrono::steady_clock::now();
        Rng rng(derive_seed(1001, Stream::generic, static_cast<std::uint64_t>(g)));
        auto [xs, ys] = vale_maurelli_pair(spec.frame, spec.reported, spec.covariance, 1000000,
                                           rng);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        worst_seconds = std::max(worst_seconds, seconds);

        struct Check {
            const char* name;
            double value, target, se;
        };
        std::vector<Check> checks;
        std::span<const double> none;
        auto add_marginal = [&](std::span<const double> data, const MomentSpec& m,
                                const char* tag) {
            auto stat = [](auto f) {
                return [f](std::span<const double> v, std::span<const double>) {
                    return f(sample_moments(v));
                };
            };
            auto [mean, mean_se] = batched_estimate(data, none, 50, stat([](auto s) { return s.mean; }));
            auto [var, var_se] = batched_estimate(data, none, 50, stat([](auto s) { return s.variance; }));
            auto [skew, skew_se] = batched_estimate(data, none, 50, stat([](auto s) { return s.skewness; }));
            auto [kurt, kurt_se] = batched_estimate(data, none, 50, stat([](auto s) { return s.kurtosis; }));
            checks.push_back({tag, mean, m.mean, mean_se});
            checks.push_back({tag, var, m.variance, var_se});
            checks.push_back({tag, skew, m.skewness, skew_se});
            checks.push_back({tag, kurt, m.kurtosis, kurt_se});
        };
        add_marginal(xs, spec.frame, "frame");
        add_marginal(ys, spec.reported, "reported");
        auto cov_stat = [](std::span<const double> a, std::span<const double> b) {
            return sample_covariance(a, b);
        };
        auto [cov, cov_se] = batched_estimate(std::span<const double>(xs),
                                              std::span<const double>(ys), 50, cov_stat);
        checks.push_back({"cov", cov, spec.covariance, cov_se});

        for (const Check& c : checks) {
            if (!within_3se(c.value, c.target, c.se)) {
                all_ok = false;
                if (first_failure.empty())
                    first_failure = fmt("row %s %s: value %.4f target %.4f se %.4f",
                                        std::string(kSizeGroupLabels[static_cast<std::size_t>(g)])
                                            .c_str(),
                                        c.name, c.value, c.target, c.se);
            }
        }
        if (seconds > 120.0) {
            all_ok = false;
            if (first_failure.empty()) first_failure = fmt("row %d took %.1f s", g, seconds);
        }
    }
    report("C1 moment fidelity", all_ok,
           all_ok ? fmt("14 rows x 9 statistics within 3 MC SEs of 1e6 draws; slowest row %.2f s",
                        worst_seconds)
                  : first_failure);
}

// ---------------------------------------------------------------------------
// C2: calibration equals the closed-form GREG weights and an independently
// assembled constrained minimizer on tiny problems.

void criterion_2() {
    Rng rng(2002);
    bool ok = true;
    std::string detail;
    double worst = 0.0;
    for (int rep = 0; rep < 200 && ok; ++rep) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(4));
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.below(2));
        CalibrationProblem prob;
        prob.initial_weights = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.5 + 2.0 * rng.uniform(); });
        prob.tuning = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.5 + rng.uniform(); });
        prob.covariates = Eigen::MatrixXd::NullaryExpr(n, p, [&] { return rng.normal(); });
        if (p == 2) prob.covariates.col(0).setOnes();
        prob.benchmarks = prob.covariates.transpose() * prob.initial_weights +
                          0.5 * Eigen::VectorXd::NullaryExpr(p, [&] { return rng.normal(); });
        CalibrationResult res;
        try {
            res = chi_square_calibrate(prob);
        } catch (const Error&) {
            continue;
        }

        // Closed form: w = d (1 + q x'lambda), lambda from the normal system.
        Eigen::MatrixXd m = prob.covariates.transpose() *
                            (prob.initial_weights.array() * prob.tuning.array()).matrix().asDiagonal() *
                            prob.covariates;
        Eigen::VectorXd lambda = m.colPivHouseholderQr().solve(
            prob.benchmarks - prob.covariates.transpose() * prob.initial_weights);
        Eigen::VectorXd closed = prob.initial_weights.array() *
                                 (1.0 + prob.tuning.array() * (prob.covariates * lambda).array());
        const double gap_closed = (res.weights - closed).cwiseAbs().maxCoeff();

        // Brute force: full KKT system in (w, mu) assembled explicitly.
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + p, n + p);
        Eigen::VectorXd rhs(n + p);
        for (Eigen::Index i = 0; i < n; ++i) {
            kkt(i, i) = 1.0 / (prob.tuning[i] * prob.initial_weights[i]);
            rhs[i] = 1.0 / prob.tuning[i];
        }
        kkt.block(0, n, n, p) = -prob.covariates;
        kkt.block(n, 0, p, n) = prob.covariates.transpose();
        rhs.tail(p) = prob.benchmarks;
        Eigen::VectorXd solution = kkt.fullPivLu().solve(rhs);
        const double gap_kkt = (res.weights - solution.head(n)).cwiseAbs().maxCoeff();

        worst = std::max(worst, std::max(gap_closed, gap_kkt));
        if (gap_closed > 1e-8 || gap_kkt > 1e-8) {
            ok = false;
            detail = fmt("rep %d: closed-form gap %.2e, KKT gap %.2e", rep, gap_closed, gap_kkt);
        }
    }
    report("C2 calibration oracle", ok,
           ok ? fmt("200 problems of 2-5 units match both routes; worst gap %.2e", worst)
              : detail);
}

// ---------------------------------------------------------------------------
// C3: logistic fits match a separately coded IRLS on random datasets.

Eigen::VectorXd irls_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    for (int iter = 0; iter < 500; ++iter) {
        Eigen::VectorXd eta = x * beta;
        Eigen::VectorXd p = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
        Eigen::VectorXd v = p.array() * (1.0 - p.array());
        Eigen::VectorXd z = eta.array() + (y - p).array() / v.array();
        Eigen::VectorXd ww = w.array() * v.array();
        Eigen::MatrixXd h = x.transpose() * ww.asDiagonal() * x;
        Eigen::VectorXd next = h.ldlt().solve(x.transpose() * (ww.asDiagonal() * z));
        if ((next - beta).norm() < 1e-14) return next;
        beta = next;
    }
    return beta;
}

void criterion_3() {
    Rng rng(3003);
    bool ok = true;
    std::string detail;
    int tested = 0;
    double worst = 0.0;
    while (tested < 40) {
        const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.below(91));
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.below(4));
        Eigen::MatrixXd x(n, p);
        x.col(0).setOnes();
        for (Eigen::Index j = 1; j < p; ++j)
            for (Eigen::Index i = 0; i < n; ++i) x(i, j) = rng.normal();
        Eigen::VectorXd beta_true = Eigen::VectorXd::NullaryExpr(p, [&] { return 0.8 * rng.normal(); });
        Eigen::VectorXd y(n), w(n);
        int ones = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pr = 1.0 / (1.0 + std::exp(-x.row(i).dot(beta_true)));
            y[i] = rng.bernoulli(pr) ? 1.0 : 0.0;
            ones += static_cast<int>(y[i]);
            w[i] = 0.5 + 2.5 * rng.uniform();
        }
        if (ones == 0 || ones == n) continue;
        LogisticFit fit;
        try {
            fit = fit_logistic_weighted(y, x, w);
        } catch (const Error&) {
            continue;
        }
        const double gap = (fit.beta - irls_oracle(x, y, w)).cwiseAbs().maxCoeff();
        worst = std::max(worst, gap);
        if (gap > 1e-6) {
            ok = false;
            detail = fmt("dataset %d (n=%ld p=%ld): coefficient gap %.2e", tested, n, p, gap);
            break;
        }
        ++tested;
    }
    report("C3 logistic oracle", ok,
           ok ? fmt("40 weighted datasets of 10-100 points match IRLS; worst gap %.2e", worst)
              : detail);
}

// ---------------------------------------------------------------------------
// C4: allocation equals exhaustive grid search on small problems.

StratifiedFrame make_strata(std::vector<Stratum> strata) {
    StratifiedFrame out;
    out.strata = std::move(strata);
    out.members.resize(out.strata.size());
    return out;
}

std::uint64_t grid_search_total(const StratifiedFrame& s,
                                const std::vector<ConstraintSpec>& constraints) {
    const std::size_t H = s.strata.size();
    std::vector<std::uint64_t> lo(H), hi(H);
    for (std::size_t h = 0; h < H; ++h) {
        const Stratum& st = s.strata[h];
        const bool ta = st.take_all || st.count <= 6;
        lo[h] = ta ? st.count : std::min<std::uint64_t>(6, st.count);
        hi[h] = st.count;
    }
    std::uint64_t best = UINT64_MAX;
    std::vector<std::uint64_t> n(H);
    std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t h, std::uint64_t acc) {
        if (acc >= best) return;
        if (h == H) {
            Allocation a;
            a.n_h.assign(n.begin(), n.end());
            for (const ConstraintSpec& c : constraints)
                if (domain_rse(s, a, c) > c.target_rse + 1e-12) return;
            best = acc;
            return;
        }
        for (std::uint64_t v = lo[h]; v <= hi[h]; ++v) {
            n[h] = v;
            rec(h + 1, acc + v);
        }
    };
    rec(0, 0);
    return best;
}

void criterion_4() {
    Rng rng(4004);
    bool ok = true;
    std::string detail;
    int cases = 0;
    for (int rep = 0; rep < 40 && ok; ++rep) {
        const int H = 2 + static_cast<int>(rng.below(2));
        std::vector<Stratum> strata;
        for (int h = 0; h < H; ++h) {
            Stratum st;
            st.key = {static_cast<std::uint8_t>(h % 2), static_cast<std::uint8_t>(h % 3), 2};
            st.count = 15 + rng.below(45);
            st.sd_earnings = 10.0 + 80.0 * rng.uniform();
            st.total_earnings = static_cast<double>(st.count) * (200.0 + 600.0 * rng.uniform());
            strata.push_back(st);
        }
        StratifiedFrame s = make_strata(strata);
        std::vector<ConstraintSpec> constraints = {{DomainKind::national, 0, 0.015 + 0.03 * rng.uniform()}};
        if (rng.bernoulli(0.5)) constraints.push_back({DomainKind::state, 0, 0.05});
        Allocation a = bethel_chromy_allocate(s, constraints);
        const std::uint64_t oracle = grid_search_total(s, constraints);
        for (const ConstraintSpec& c : constraints) {
            if (domain_rse(s, a, c) > c.target_rse + 1e-12) {
                ok = false;
                detail = fmt("rep %d: infeasible at rse %.4f", rep, domain_rse(s, a, c));
            }
        }
        if (a.total() != oracle) {
            ok = false;
            detail = fmt("rep %d: total %llu vs grid optimum %llu", rep,
                         static_cast<unsigned long long>(a.total()),
                         static_cast<unsigned long long>(oracle));
        }
        ++cases;
    }
    report("C4 allocation oracle", ok,
           ok ? fmt("%d random 2-3 stratum problems match exhaustive search", cases) : detail);
}

// ---------------------------------------------------------------------------
// Desk-scale scenario runs shared by C5-C8.

PopulationFrame desk_frame() {
    PopulationConfig cfg = default_population_config(90000);
    cfg.seed = 550;
    return synthesize_population(cfg);
}

const CellStats& cell(const ScenarioResult& res, const std::string& id, int variable) {
    for (const EstimatorSummary& est : res.estimators)
        if (est.id == id) return est.by_variable[static_cast<std::size_t>(variable)];
    throw std::runtime_error("estimator missing from scenario result: " + id);
}

void criterion_5_6(const PopulationFrame& frame) {
    ScenarioConfig cfg;
    cfg.missingness = Missingness::sar;
    cfg.measurement_error = false;
    cfg.designs = {DesignKind::single, DesignKind::dual_screening};
    cfg.estimators = {"ht", "greg", "rdi", "qr_ma", "wgt_reg_mi", "sp", "sp_cal"};
    cfg.replicates = 200;
    cfg.seed = 560;
    const auto start = std::chrono::steady_clock::now();
    ScenarioResult res = run_scenario(cfg, frame, 0);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    bool ok5 = true;
    std::string detail5;
    for (const char* id : {"greg", "rdi", "qr_ma", "sp", "sp_cal"}) {
        for (int v = 0; v < 2; ++v) {  // earn and emp
            const CellStats& c = cell(res, id, v);
            if (std::abs(c.rb) > 0.005 || c.n_failures > 0) {
                ok5 = false;
                if (detail5.empty())
                    detail5 = fmt("%s %s: RB %.3f%%, %u failures", id,
                                  kVariableNames[static_cast<std::size_t>(v)], 100.0 * c.rb,
                                  c.n_failures);
            }
        }
    }
    report("C5 unbiasedness suite", ok5,
           ok5 ? fmt("GREG/RDI/QR-MA/SP/SP_Cal all |RB| <= 0.5%% on earn+emp (R=200, %.0f s)",
                     seconds)
               : detail5);

    const double sp_cal_earn = cell(res, "sp_cal", 0).rrmse;
    const double greg_earn = cell(res, "greg", 0).rrmse;
    const double ht_earn = cell(res, "ht", 0).rrmse;
    const double mi_ovt = cell(res, "wgt_reg_mi", 2).rrmse;
    const double rdi_ovt = cell(res, "rdi", 2).rrmse;
    const bool ok6 = sp_cal_earn < 0.9 * greg_earn && greg_earn < 0.9 * ht_earn &&
                     mi_ovt < 0.9 * rdi_ovt;
    report("C6 efficiency ordering", ok6,
           fmt("RRMSE earn: SP_Cal %.2f%% < GREG %.2f%% < HT %.2f%%; ovt: Wgt_Reg_MI %.2f%% vs "
               "RDI %.2f%% (10%% margins)",
               100 * sp_cal_earn, 100 * greg_earn, 100 * ht_earn, 100 * mi_ovt, 100 * rdi_ovt));
}

void criterion_7(const PopulationFrame& frame) {
    ScenarioConfig cfg;
    cfg.missingness = Missingness::sar;
    cfg.measurement_error = true;
    cfg.designs = {DesignKind::single, DesignKind::dual_screening};
    cfg.estimators = {"greg", "kw", "kwfr", "sp", "kw_cor", "kwfr_cor"};
    cfg.replicates = 200;
    cfg.seed = 570;
    ScenarioResult res = run_scenario(cfg, frame, 0);

    bool ok = true;
    std::string detail;
    for (const char* id : {"kw", "kwfr", "sp"}) {
        const double rb = cell(res, id, 0).rb;
        if (!(rb >= -0.20 && rb <= -0.05)) {
            ok = false;
            detail += fmt("%s RB(earn) %.1f%% outside [-20,-5]; ", id, 100 * rb);
        }
    }
    for (const char* id : {"kw_cor", "kwfr_cor"}) {
        const double rb = cell(res, id, 0).rb;
        if (std::abs(rb) > 0.02) {
            ok = false;
            detail += fmt("%s RB(earn) %.2f%% above 2%%; ", id, 100 * rb);
        }
        if (cell(res, id, 0).rrmse <= cell(res, "greg", 0).rrmse) {
            ok = false;
            detail += fmt("%s RRMSE did not exceed GREG; ", id);
        }
    }
    report("C7 measurement-error signature", ok,
           ok ? fmt("uncorrected KW %.1f%%, KWFr %.1f%%, SP %.1f%%; corrected %.2f%%/%.2f%% with "
                    "RRMSE %.2f%%/%.2f%% > GREG %.2f%%",
                    100 * cell(res, "kw", 0).rb, 100 * cell(res, "kwfr", 0).rb,
                    100 * cell(res, "sp", 0).rb, 100 * cell(res, "kw_cor", 0).rb,
                    100 * cell(res, "kwfr_cor", 0).rb, 100 * cell(res, "kw_cor", 0).rrmse,
                    100 * cell(res, "kwfr_cor", 0).rrmse, 100 * cell(res, "greg", 0).rrmse)
              : detail);
}

void criterion_8(const PopulationFrame& frame) {
    ScenarioConfig cfg;
    cfg.missingness = Missingness::snar;
    cfg.measurement_error = false;
    cfg.designs = {DesignKind::single, DesignKind::dual_screening};
    cfg.estimators = {"kw", "kw_earn", "sp", "sp_cal"};
    cfg.replicates = 200;
    cfg.seed = 580;
    ScenarioResult res = run_scenario(cfg, frame, 0);

    bool ok = true;
    std::string detail;
    const double kw_rb = cell(res, "kw", 0).rb;
    const double kw_earn_rb = cell(res, "kw_earn", 0).rb;
    if (!(kw_rb <= -0.015)) {
        ok = false;
        detail += fmt("KW RB(earn) %.2f%% not <= -1.5%%; ", 100 * kw_rb);
    }
    if (std::abs(kw_earn_rb) > 0.01) {
        ok = false;
        detail += fmt("KW-Earn |RB(earn)| %.2f%% above 1%%; ", 100 * kw_earn_rb);
    }
    for (const char* id : {"sp", "sp_cal"}) {
        for (int v = 0; v < 2; ++v) {
            const double rb = cell(res, id, v).rb;
            if (std::abs(rb) > 0.005) {
                ok = false;
                detail += fmt("%s RB(%s) %.2f%%; ", id, kVariableNames[static_cast<std::size_t>(v)],
                              100 * rb);
            }
        }
    }
    report("C8 outcome-dependent-selection signature", ok,
           ok ? fmt("KW RB %.2f%% <= -1.5%%, KW-Earn %.2f%% within 1%%, SP/SP_Cal within 0.5%%",
                    100 * kw_rb, 100 * kw_earn_rb)
              : detail);
}

// ---------------------------------------------------------------------------
// C9: double robustness under either a wrong predictor or wrong propensities.

void criterion_9(const PopulationFrame& frame) {
    std::vector<std::uint32_t> all(frame.size());
    std::iota(all.begin(), all.end(), 0);
    StratifiedFrame strat = stratify(frame, all);
    Allocation alloc = bethel_chromy_allocate(strat, default_constraints());
    SelectionModel sel = default_sar_model();
    const std::vector<double> pi_true = selection_probabilities(frame, sel);

    // Exact finite-population conditional mean given (industry, employment):
    // the strongest possible "correct" predictor.
    std::unordered_map<std::uint64_t, Totals> cell_sum;
    std::unordered_map<std::uint64_t, double> cell_count;
    auto cell_key = [](const UnitRecord& u) {
        return (static_cast<std::uint64_t>(u.industry) << 48) ^
               static_cast<std::uint64_t>(u.frame_employment);
    };
    for (const UnitRecord& u : frame.units) {
        Totals& t = cell_sum[cell_key(u)];
        t.earn += u.earnings;
        t.emp += static_cast<double>(u.reported_employment);
        t.ovt += u.overtime;
        cell_count[cell_key(u)] += 1.0;
    }
    UnitPredictor oracle_mean = [&](const UnitRecord& u) {
        const Totals& t = cell_sum.at(cell_key(u));
        const double n = cell_count.at(cell_key(u));
        return Totals{t.earn / n, t.emp / n, t.ovt / n};
    };
    UnitPredictor bad_model = [](const UnitRecord& u) {
        return Totals{2500.0 + 11.0 * static_cast<double>(u.frame_employment), 4.0, 90.0};
    };

    Totals truth;
    for (const UnitRecord& u : frame.units) {
        truth.earn += u.earnings;
        truth.emp += static_cast<double>(u.reported_employment);
        truth.ovt += u.overtime;
    }

    const int draws = 500;
    double mean_arm1_earn = 0, mean_arm2_earn = 0, mean_arm1_emp = 0, mean_arm2_emp = 0;
    for (int r = 0; r < draws; ++r) {
        Rng brng(derive_seed(590, Stream::big_data, static_cast<std::uint64_t>(r)));
        BigDataset big = draw_big_dataset(frame, pi_true, false, brng);
        Rng srng(derive_seed(590, Stream::sample_single, static_cast<std::uint64_t>(r)));
        WeightedSample a = draw_stratified_sample(strat, alloc, srng);

        Eigen::VectorXd true_pi_b(static_cast<Eigen::Index>(big.member_ids.size()));
        Eigen::VectorXd distorted_pi_b(static_cast<Eigen::Index>(big.member_ids.size()));
        for (std::size_t k = 0; k < big.member_ids.size(); ++k) {
            const double p = pi_true[big.member_ids[k]];
            true_pi_b[static_cast<Eigen::Index>(k)] = p;
            // Halve the log-odds: a systematically wrong, still-positive model.
            const double logit = std::log(p / (1.0 - std::min(p, 1.0 - 1e-12)));
            distorted_pi_b[static_cast<Eigen::Index>(k)] =
                1.0 / (1.0 + std::exp(-0.5 * logit));
        }
        const ValueSource src = ValueSource::recorded(false);
        const double n = static_cast<double>(frame.size());
        Totals arm1 = dr_total(frame, a, big.member_ids, true_pi_b, bad_model, src, n,
                               DoublyRobustVariant::dr2);
        Totals arm2 = dr_total(frame, a, big.member_ids, distorted_pi_b, oracle_mean, src, n,
                               DoublyRobustVariant::dr2);
        mean_arm1_earn += arm1.earn / draws;
        mean_arm2_earn += arm2.earn / draws;
        mean_arm1_emp += arm1.emp / draws;
        mean_arm2_emp += arm2.emp / draws;
    }
    const double rb1 = mean_arm1_earn / truth.earn - 1.0;
    const double rb2 = mean_arm2_earn / truth.earn - 1.0;
    const double rb1e = mean_arm1_emp / truth.emp - 1.0;
    const double rb2e = mean_arm2_emp / truth.emp - 1.0;
    const bool ok = std::abs(rb1) <= 0.01 && std::abs(rb2) <= 0.01 && std::abs(rb1e) <= 0.01 &&
                    std::abs(rb2e) <= 0.01;
    report("C9 double robustness", ok,
           fmt("500 desk replicates: correct-propensity arm RB %.2f%%/%.2f%%, correct-model arm "
               "RB %.2f%%/%.2f%% (earn/emp)",
               100 * rb1, 100 * rb1e, 100 * rb2, 100 * rb2e));
}

// ---------------------------------------------------------------------------
// C10: reference sample sizes against the published design anchors.

void criterion_10(const PopulationFrame& desk) {
    BethelOptions bethel;

    auto single_total = [&](const PopulationFrame& frame) {
        DesignFrames d = build_design_frame(frame, nullptr, DesignKind::single);
        StratifiedFrame s = stratify(frame, d.sampling);
        return bethel_chromy_allocate(s, default_constraints(), bethel).total();
    };
    auto dual_mean_total = [&](const PopulationFrame& frame, int reps) {
        SelectionModel sel = default_sar_model();
        auto pi = selection_probabilities(frame, sel);
        double acc = 0.0;
        for (int r = 0; r < reps; ++r) {
            Rng rng(derive_seed(600, Stream::big_data, static_cast<std::uint64_t>(r)));
            BigDataset big = draw_big_dataset(frame, pi, false, rng);
            DesignFrames d = build_design_frame(frame, &big, DesignKind::dual_screening);
            StratifiedFrame s = stratify(frame, d.sampling);
            acc += static_cast<double>(
                bethel_chromy_allocate(s, default_constraints(), bethel).total());
        }
        return acc / reps;
    };

    // Full scale: the published population when available, otherwise the
    // bundled synthetic defaults at N = 900,000.
    PopulationFrame full;
    std::string source = "synthesized defaults (N=900,000)";
    if (const char* path = std::getenv("SURVINT_ZENODO_CSV"); path != nullptr) {
        full = load_population(path);
        source = std::string("ingested ") + path;
    } else {
        PopulationConfig cfg = default_population_config(900000);
        full = synthesize_population(cfg);
    }
    const double full_single = static_cast<double>(single_total(full));
    const double full_dual = dual_mean_total(full, 3);
    const double full_saving = 1.0 - full_dual / full_single;
    const bool full_total_ok = std::abs(full_single - 7715.0) <= 0.10 * 7715.0;
    const bool full_saving_ok = full_saving >= 0.35 && full_saving <= 0.45;

    const double desk_single = static_cast<double>(single_total(desk));
    const double desk_dual = dual_mean_total(desk, 3);
    const double desk_saving = 1.0 - desk_dual / desk_single;
    const bool desk_saving_ok = desk_saving >= 0.35 && desk_saving <= 0.45;

    const bool ok = full_total_ok && full_saving_ok && desk_saving_ok;
    std::string detail =
        fmt("full scale (%s): single n=%.0f (target 7715 +-10%%: %s), dual saving %.1f%% "
            "(35-45%%: %s); desk scale: single n=%.0f, saving %.1f%% (35-45%%: %s)",
            source.c_str(), full_single, full_total_ok ? "ok" : "MISS", 100 * full_saving,
            full_saving_ok ? "ok" : "MISS", desk_single, 100 * desk_saving,
            desk_saving_ok ? "ok" : "MISS");
    if (!desk_saving_ok)
        detail += " | note: at N=90,000 each stratum's minimum of 6 units dominates the "
                  "allocation, which caps the attainable dual-frame saving well below the "
                  "full-scale band; see the design notes";
    report("C10 sample-size saving", ok, detail);
}

// ---------------------------------------------------------------------------
// C11: simulate via the CLI is byte-identical across thread counts.

void criterion_11() {
    const char* cli = std::getenv("SURVINT_CLI");
    if (cli == nullptr) {
        report("C11 determinism", false, "SURVINT_CLI is not set; run through ctest");
        return;
    }
    const char* scenario = R"({
        "scenario": {"missingness": "SAR", "measurement_error": false},
        "designs": ["single", "dual_screening"],
        "estimators": ["greg", "kw", "sp_cal"],
        "replicates": 6,
        "seed": 61,
        "population": {"synthesize": {"n": 9000, "seed": 44}}
    })";
    {
        std::ofstream out("acceptance_scenario.json");
        out << scenario;
    }
    auto run = [&](const char* args) {
        const std::string cmd = std::string(cli) + " " + args;
        return std::system(cmd.c_str());
    };
    const int s1 = run("simulate --config acceptance_scenario.json --out acc_t1.csv --threads 1 "
                       "2>/dev/null");
    const int s2 = run("simulate --config acceptance_scenario.json --out acc_t4.csv --threads 4 "
                       "2>/dev/null");
    auto slurp = [](const char* path) {
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string a = slurp("acc_t1.csv");
    const std::string b = slurp("acc_t4.csv");
    const bool ok = s1 == 0 && s2 == 0 && !a.empty() && a == b;
    std::remove("acceptance_scenario.json");
    std::remove("acc_t1.csv");
    std::remove("acc_t4.csv");
    report("C11 determinism", ok,
           ok ? fmt("CLI results identical for --threads 1 vs 4 (%zu bytes)", a.size())
              : "outputs differ or a run failed");
}

// ---------------------------------------------------------------------------
// Supporting invariant: the linked-propensity weighting is consistent when
// its model is correctly specified.

void supporting_kw_consistency(const PopulationFrame& frame) {
    std::vector<std::uint32_t> all(frame.size());
    std::iota(all.begin(), all.end(), 0);
    StratifiedFrame strat = stratify(frame, all);
    Allocation alloc = bethel_chromy_allocate(strat, default_constraints());
    SelectionModel sel;
    sel.phi0 = 0.09;
    sel.phi1 = 0.009;  // logit-linear, no industry stage: the model is exact
    const std::vector<double> pi = selection_probabilities(frame, sel);

    double truth = 0.0;
    for (const UnitRecord& u : frame.units) truth += u.earnings;

    const int draws = 500;
    double mean = 0.0;
    int failures = 0;
    for (int r = 0; r < draws; ++r) {
        Rng brng(derive_seed(610, Stream::big_data, static_cast<std::uint64_t>(r)));
        BigDataset big = draw_big_dataset(frame, pi, false, brng);
        Rng srng(derive_seed(610, Stream::sample_single, static_cast<std::uint64_t>(r)));
        WeightedSample a = draw_stratified_sample(strat, alloc, srng);
        link_big_membership(a, big);
        try {
            PropensityModel model = kw_propensities(frame, a, false);
            Eigen::VectorXd pi_hat = evaluate_propensities(model, frame, big.member_ids);
            Totals t = hajek_ipw(frame, big.member_ids, pi_hat,
                                 static_cast<double>(frame.size()),
                                 ValueSource::recorded(false));
            mean += t.earn / draws;
        } catch (const Error&) {
            ++failures;
        }
    }
    const double rb = mean / truth - 1.0;
    const bool ok = std::abs(rb) < 0.01 && failures == 0;
    report("S1 linked-propensity consistency", ok,
           fmt("RB %.2f%% over 500 desk replicates, %d failures", 100 * rb, failures));
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();
        PopulationFrame desk = desk_frame();
        criterion_5_6(desk);
        criterion_7(desk);
        criterion_8(desk);
        criterion_9(desk);
        criterion_10(desk);
        criterion_11();
        supporting_kw_consistency(desk);
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance aborted: %s\n", e.what());
        return 2;
    }
    const double minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
    std::printf("acceptance finished in %.1f min with %d failing criteria\n", minutes, g_failures);
    return g_failures == 0 ? 0 : 1;
}
