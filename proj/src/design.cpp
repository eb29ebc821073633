#include "survint/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "survint/error.hpp"

namespace survint {

std::uint64_t StratifiedFrame::total_count() const {
    std::uint64_t n = 0;
    for (const Stratum& s : strata) n += s.count;
    return n;
}

std::uint64_t Allocation::total() const {
    std::uint64_t n = 0;
    for (std::uint64_t v : n_h) n += v;
    return n;
}

StratifiedFrame stratify(const PopulationFrame& frame, std::span<const std::uint32_t> subset) {
    if (subset.empty()) throw ConfigError("empty-frame", "cannot stratify an empty frame subset");
    std::map<StratumKey, std::vector<std::uint32_t>> cells;
    for (std::uint32_t idx : subset) {
        const UnitRecord& u = frame.units[idx];
        StratumKey key{u.state, u.industry,
                       static_cast<std::uint8_t>(size_band(u.frame_employment))};
        cells[key].push_back(idx);
    }
    StratifiedFrame out;
    out.strata.reserve(cells.size());
    out.members.reserve(cells.size());
    for (auto& [key, members] : cells) {
        Stratum s;
        s.key = key;
        s.count = members.size();
        double sum = 0.0;
        for (std::uint32_t idx : members) sum += frame.units[idx].earnings;
        s.total_earnings = sum;
        if (members.size() > 1) {
            const double mean = sum / static_cast<double>(members.size());
            double ss = 0.0;
            for (std::uint32_t idx : members) {
                const double d = frame.units[idx].earnings - mean;
                ss += d * d;
            }
            s.sd_earnings = std::sqrt(ss / static_cast<double>(members.size() - 1));
        }
        s.take_all = key.band == kNumSizeBands - 1;
        out.strata.push_back(s);
        out.members.push_back(std::move(members));
    }
    return out;
}

std::vector<ConstraintSpec> default_constraints() {
    std::vector<ConstraintSpec> out;
    out.push_back({DomainKind::national, 0, 0.015});
    for (int d = 0; d < kNumIndustries; ++d) out.push_back({DomainKind::industry, d, 0.05});
    for (int s = 0; s < kNumStates; ++s) out.push_back({DomainKind::state, s, 0.05});
    return out;
}

namespace {

bool in_domain(const StratumKey& key, const ConstraintSpec& c) {
    switch (c.kind) {
        case DomainKind::national: return true;
        case DomainKind::industry: return key.industry == c.index;
        case DomainKind::state: return key.state == c.index;
    }
    return false;
}

}  // namespace

double domain_variance(const StratifiedFrame& s, const Allocation& a, const ConstraintSpec& c) {
    double v = 0.0;
    for (std::size_t h = 0; h < s.strata.size(); ++h) {
        const Stratum& st = s.strata[h];
        if (!in_domain(st.key, c) || a.n_h[h] == 0) continue;
        const double nh = static_cast<double>(a.n_h[h]);
        const double Nh = static_cast<double>(st.count);
        v += Nh * Nh * st.sd_earnings * st.sd_earnings * (1.0 / nh - 1.0 / Nh);
    }
    return v;
}

double domain_rse(const StratifiedFrame& s, const Allocation& a, const ConstraintSpec& c) {
    double total = 0.0;
    for (const Stratum& st : s.strata)
        if (in_domain(st.key, c)) total += st.total_earnings;
    if (total == 0.0) return 0.0;
    return std::sqrt(std::max(0.0, domain_variance(s, a, c))) / total;
}

Allocation bethel_chromy_allocate(const StratifiedFrame& stratification,
                                  const std::vector<ConstraintSpec>& constraints,
                                  const BethelOptions& options) {
    const std::size_t n_strata = stratification.strata.size();
    if (constraints.empty())
        throw ConfigError("invalid-constraints", "at least one RSE constraint is required");
    for (const ConstraintSpec& c : constraints)
        if (!(c.target_rse > 0.0))
            throw ConfigError("invalid-constraints", "target RSE must be positive");

    Allocation alloc;
    alloc.n_h.assign(n_strata, 0);

    // Lower bounds: min-n rule; take-all and tiny strata are censuses.
    std::vector<std::uint64_t> lower(n_strata);
    std::vector<int> fixed(n_strata, 0);  // nonzero: allocation pinned at alloc.n_h
    for (std::size_t h = 0; h < n_strata; ++h) {
        const Stratum& st = stratification.strata[h];
        const bool census = st.take_all || st.count <= options.min_stratum_n;
        lower[h] = census ? st.count : std::min<std::uint64_t>(options.min_stratum_n, st.count);
        if (census) {
            fixed[h] = 1;
            alloc.n_h[h] = st.count;
        }
    }

    // Active-set loop: solve the continuous problem over free strata by the
    // dual fixed point, pin strata that hit a bound (census, or the minimum
    // size), move their variance contribution to the constant side, re-solve.
    for (int outer = 0; outer < 512; ++outer) {
        struct ScaledConstraint {
            std::vector<double> a;  // scaled so that sum over free of a[h]/n_h <= 1
        };
        std::vector<ScaledConstraint> active;
        for (const ConstraintSpec& c : constraints) {
            ScaledConstraint sc;
            sc.a.assign(n_strata, 0.0);
            double total = 0.0;
            double any_var = 0.0;
            double b = 0.0;
            for (std::size_t h = 0; h < n_strata; ++h) {
                const Stratum& st = stratification.strata[h];
                if (!in_domain(st.key, c)) continue;
                total += st.total_earnings;
                const double Nh = static_cast<double>(st.count);
                const double var_full = Nh * Nh * st.sd_earnings * st.sd_earnings;
                if (fixed[h]) {
                    // Pinned contribution is a constant on the target side.
                    if (alloc.n_h[h] < st.count)
                        b -= var_full * (1.0 / static_cast<double>(alloc.n_h[h]) - 1.0 / Nh);
                    continue;
                }
                sc.a[h] = var_full;
                b += Nh * st.sd_earnings * st.sd_earnings;
                any_var += var_full;
            }
            const double target = c.target_rse * total;
            b += target * target;
            if (any_var == 0.0 || total == 0.0) continue;  // nothing to steer
            if (b <= 0.0) continue;  // hopeless here; the repair loop decides
            for (double& v : sc.a) v /= b;
            active.push_back(std::move(sc));
        }

        std::vector<double> alpha(active.size(), active.empty() ? 0.0 : 1.0 / active.size());
        std::vector<double> x(n_strata, 0.0);  // sqrt of the dual quadratic form
        if (!active.empty()) {
            for (int iter = 0; iter < options.max_iterations; ++iter) {
                for (std::size_t h = 0; h < n_strata; ++h) {
                    if (fixed[h]) continue;
                    double den = 0.0;
                    for (std::size_t j = 0; j < active.size(); ++j)
                        den += alpha[j] * active[j].a[h];
                    x[h] = den > 0.0 ? 1.0 / std::sqrt(den) : 0.0;
                }
                std::vector<double> s(active.size(), 0.0);
                for (std::size_t j = 0; j < active.size(); ++j) {
                    double sj = 0.0;
                    for (std::size_t h = 0; h < n_strata; ++h)
                        if (!fixed[h]) sj += active[j].a[h] * x[h];
                    s[j] = sj;
                }
                double norm = 0.0;
                std::vector<double> next(active.size());
                for (std::size_t j = 0; j < active.size(); ++j) {
                    next[j] = alpha[j] * s[j] * s[j];
                    norm += next[j];
                }
                if (norm <= 0.0) break;  // every constraint is slack
                double delta = 0.0;
                for (std::size_t j = 0; j < active.size(); ++j) {
                    next[j] /= norm;
                    delta = std::max(delta, std::abs(next[j] - alpha[j]));
                }
                alpha = next;
                if (delta < options.tolerance) break;
            }
        }

        // n_h = sqrt(M) / x~_h with sqrt(M) = max_j S_j(alpha).
        double sqrt_m = 0.0;
        for (std::size_t j = 0; j < active.size(); ++j) {
            double sj = 0.0;
            for (std::size_t h = 0; h < n_strata; ++h)
                if (!fixed[h]) sj += active[j].a[h] * x[h];
            sqrt_m = std::max(sqrt_m, sj);
        }

        bool pinned = false;
        for (std::size_t h = 0; h < n_strata; ++h) {
            if (fixed[h]) continue;
            const Stratum& st = stratification.strata[h];
            const double cont = x[h] > 0.0 ? sqrt_m / x[h] : 0.0;
            if (cont >= static_cast<double>(st.count)) {
                fixed[h] = 1;
                alloc.n_h[h] = st.count;
                pinned = true;
            } else if (cont <= static_cast<double>(lower[h])) {
                fixed[h] = 1;
                alloc.n_h[h] = lower[h];
                pinned = true;
            } else {
                alloc.n_h[h] = static_cast<std::uint64_t>(std::ceil(cont - 1e-9));
            }
        }
        if (!pinned) break;
    }

    // Cached per-constraint data for the integer adjustment passes.
    const std::size_t m = constraints.size();
    std::vector<double> target_variance(m), domain_total(m);
    std::vector<std::vector<std::size_t>> constraints_of(n_strata);
    for (std::size_t j = 0; j < m; ++j) {
        double total = 0.0;
        for (std::size_t h = 0; h < n_strata; ++h) {
            if (in_domain(stratification.strata[h].key, constraints[j])) {
                total += stratification.strata[h].total_earnings;
                constraints_of[h].push_back(j);
            }
        }
        domain_total[j] = total;
        const double t = constraints[j].target_rse * total;
        target_variance[j] = t * t;
    }
    auto current_variances = [&] {
        std::vector<double> v(m, 0.0);
        for (std::size_t j = 0; j < m; ++j)
            v[j] = domain_variance(stratification, alloc, constraints[j]);
        return v;
    };
    auto rse_ok = [&](double variance, std::size_t j) {
        if (domain_total[j] == 0.0) return true;
        return std::sqrt(std::max(0.0, variance)) / domain_total[j] <=
               constraints[j].target_rse + 1e-12;
    };

    // Clamping and rounding may leave a constraint violated: grow the stratum
    // with the best variance reduction per added unit until feasible.
    {
        std::vector<double> v = current_variances();
        for (int guard = 0;; ++guard) {
            std::size_t worst = m;
            double worst_excess = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                if (rse_ok(v[j], j)) continue;
                const double excess =
                    std::sqrt(v[j]) / domain_total[j] - constraints[j].target_rse;
                if (excess > worst_excess) {
                    worst_excess = excess;
                    worst = j;
                }
            }
            if (worst == m) break;
            if (guard > 5'000'000)
                throw NumericError("no-convergence", "allocation repair loop did not terminate");
            const ConstraintSpec& c = constraints[worst];
            std::size_t best = n_strata;
            double best_gain = 0.0;
            for (std::size_t h = 0; h < n_strata; ++h) {
                const Stratum& st = stratification.strata[h];
                if (!in_domain(st.key, c) || alloc.n_h[h] >= st.count) continue;
                const double nh = static_cast<double>(alloc.n_h[h]);
                const double gain = static_cast<double>(st.count) *
                                    static_cast<double>(st.count) * st.sd_earnings *
                                    st.sd_earnings * (1.0 / nh - 1.0 / (nh + 1.0));
                if (gain > best_gain) {
                    best_gain = gain;
                    best = h;
                }
            }
            if (best == n_strata)
                throw NumericError("infeasible-constraints",
                                   "constraint cannot be met even by a census of its domain");
            const double nh = static_cast<double>(alloc.n_h[best]);
            const Stratum& st = stratification.strata[best];
            const double gain = static_cast<double>(st.count) * static_cast<double>(st.count) *
                                st.sd_earnings * st.sd_earnings * (1.0 / nh - 1.0 / (nh + 1.0));
            for (std::size_t j : constraints_of[best]) v[j] -= gain;
            alloc.n_h[best] += 1;
        }
    }

    // Greedy polish: release any unit whose removal keeps every constraint
    // satisfied (bounds clamping can leave slack).
    {
        std::vector<double> v = current_variances();
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t h = 0; h < n_strata; ++h) {
                const Stratum& st = stratification.strata[h];
                while (alloc.n_h[h] > lower[h]) {
                    const double nh = static_cast<double>(alloc.n_h[h]);
                    const double delta = static_cast<double>(st.count) *
                                         static_cast<double>(st.count) * st.sd_earnings *
                                         st.sd_earnings * (1.0 / (nh - 1.0) - 1.0 / nh);
                    bool ok = true;
                    for (std::size_t j : constraints_of[h])
                        if (!rse_ok(v[j] + delta, j)) {
                            ok = false;
                            break;
                        }
                    if (!ok) break;
                    for (std::size_t j : constraints_of[h]) v[j] += delta;
                    alloc.n_h[h] -= 1;
                    changed = true;
                }
            }
            if (changed) v = current_variances();  // refresh against drift
        }
    }
    return alloc;
}

std::string design_name(DesignKind kind) {
    switch (kind) {
        case DesignKind::single: return "single";
        case DesignKind::dual_screening: return "dual_screening";
        case DesignKind::cutoff: return "cutoff";
    }
    return "unknown";
}

DesignFrames build_design_frame(const PopulationFrame& frame, const BigDataset* big,
                                DesignKind kind) {
    DesignFrames out;
    const std::uint32_t n = static_cast<std::uint32_t>(frame.size());
    switch (kind) {
        case DesignKind::single:
            out.sampling.resize(n);
            std::iota(out.sampling.begin(), out.sampling.end(), 0);
            break;
        case DesignKind::dual_screening: {
            if (big == nullptr)
                throw ConfigError("missing-big-dataset",
                                  "the screening dual frame needs the realized B");
            for (std::uint32_t i = 0; i < n; ++i)
                (big->delta[i] ? out.excluded : out.sampling).push_back(i);
            break;
        }
        case DesignKind::cutoff:
            for (std::uint32_t i = 0; i < n; ++i)
                (size_band(frame.units[i].frame_employment) == 0 ? out.excluded : out.sampling)
                    .push_back(i);
            break;
    }
    return out;
}

WeightedSample draw_stratified_sample(const StratifiedFrame& stratification,
                                      const Allocation& allocation, Rng& rng) {
    if (allocation.n_h.size() != stratification.strata.size())
        throw ConfigError("invalid-allocation", "allocation does not match the stratification");
    WeightedSample sample;
    sample.unit_index.reserve(allocation.total());
    for (std::size_t h = 0; h < stratification.strata.size(); ++h) {
        const auto& members = stratification.members[h];
        const std::uint64_t Nh = stratification.strata[h].count;
        const std::uint64_t nh = allocation.n_h[h];
        if (nh > Nh)
            throw ConfigError("invalid-allocation", "stratum allocation exceeds its size");
        if (nh == 0) continue;
        const double weight = static_cast<double>(Nh) / static_cast<double>(nh);
        const double prob = static_cast<double>(nh) / static_cast<double>(Nh);
        // Sequential selection (one uniform per unit) gives exact SRSWOR.
        std::uint64_t needed = nh, left = Nh;
        for (std::uint32_t idx : members) {
            if (needed == 0) break;
            if (rng.below(left) < needed) {
                sample.unit_index.push_back(idx);
                sample.design_weight.push_back(weight);
                sample.inclusion_prob.push_back(prob);
                sample.stratum_id.push_back(static_cast<std::uint32_t>(h));
                --needed;
            }
            --left;
        }
    }
    return sample;
}

}  // namespace survint
