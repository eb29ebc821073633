#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "survint/frame.hpp"
#include "survint/rng.hpp"
#include "survint/sample.hpp"

namespace survint {

struct StratumKey {
    std::uint8_t state = 0;
    std::uint8_t industry = 0;
    std::uint8_t band = 0;  // index into kSizeBandLabels

    friend bool operator==(const StratumKey&, const StratumKey&) = default;
    friend auto operator<=>(const StratumKey&, const StratumKey&) = default;
};

struct Stratum {
    StratumKey key;
    std::uint64_t count = 0;        // N_h
    double sd_earnings = 0.0;       // S_h, divisor N_h - 1
    double total_earnings = 0.0;    // Y_h
    bool take_all = false;          // 300+ band, or too small to subsample
};

struct StratifiedFrame {
    std::vector<Stratum> strata;                       // sorted by key
    std::vector<std::vector<std::uint32_t>> members;   // frame indices per stratum
    std::uint64_t total_count() const;
};

// Partitions the given frame subset by (state, industry, size band); the band
// comes from each unit's frame employment. Empty cells are omitted.
StratifiedFrame stratify(const PopulationFrame& frame, std::span<const std::uint32_t> subset);

enum class DomainKind { national, industry, state };

struct ConstraintSpec {
    DomainKind kind = DomainKind::national;
    int index = 0;  // industry or state index; ignored for national
    double target_rse = 0.015;
};

// National 1.5%, plus 5% for every industry division and every state.
std::vector<ConstraintSpec> default_constraints();

struct Allocation {
    std::vector<std::uint64_t> n_h;  // aligned with the stratification
    std::uint64_t total() const;
};

struct BethelOptions {
    std::uint32_t min_stratum_n = 6;
    double tolerance = 1e-10;
    int max_iterations = 10000;
};

// Minimal total sample size subject to the anticipated stratified-SRS
// variance meeting every RSE constraint. Dual fixed-point iteration on the
// constraint multipliers, then integer rounding that preserves feasibility.
Allocation bethel_chromy_allocate(const StratifiedFrame& stratification,
                                  const std::vector<ConstraintSpec>& constraints,
                                  const BethelOptions& options = {});

// Anticipated domain variance and RSE of the earnings total at a given
// allocation; used by the allocator and its tests.
double domain_variance(const StratifiedFrame& s, const Allocation& a, const ConstraintSpec& c);
double domain_rse(const StratifiedFrame& s, const Allocation& a, const ConstraintSpec& c);

enum class DesignKind { single, dual_screening, cutoff };

std::string design_name(DesignKind kind);

struct DesignFrames {
    std::vector<std::uint32_t> sampling;  // frame subset A is drawn from
    std::vector<std::uint32_t> excluded;  // complement covered by other means
};

// single: (U, {}); dual_screening: (U \ B, B); cutoff: (U \ U_E, U_E) where
// U_E is the 0-4 employment band.
DesignFrames build_design_frame(const PopulationFrame& frame, const BigDataset* big,
                                DesignKind kind);

// SRSWOR within each stratum; take-all strata are fully enumerated.
WeightedSample draw_stratified_sample(const StratifiedFrame& stratification,
                                      const Allocation& allocation, Rng& rng);

}  // namespace survint
