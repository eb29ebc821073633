#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "survint/frame.hpp"
#include "survint/rng.hpp"

namespace survint {

// Two-stage membership model for the non-probability dataset: a logistic
// stage in frame employment and log earnings, then a multiplicative
// industry downweight.
struct SelectionModel {
    double phi0 = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;  // 0 selects at random given x (SAR)
    std::array<double, kNumIndustries> industry_downweights;

    SelectionModel() { industry_downweights.fill(1.0); }

    bool is_sar() const { return phi2 == 0.0; }
};

// Defaults used by the simulation scenarios.
SelectionModel default_sar_model();
SelectionModel default_snar_model();

// True membership probabilities over the whole frame.
std::vector<double> selection_probabilities(const PopulationFrame& frame,
                                            const SelectionModel& model);

// One realized non-probability dataset.
struct BigDataset {
    std::vector<std::uint8_t> delta;       // indicator over the frame
    std::vector<std::uint32_t> member_ids; // frame indices with delta == 1, ascending
    std::vector<double> true_pi;           // the probabilities used for the draw
    std::uint64_t n_b = 0;
    bool use_starred = false;  // read the mis-measured survey values from B
};

BigDataset draw_big_dataset(const PopulationFrame& frame, std::span<const double> pi,
                            bool use_starred, Rng& rng);

// ln(max(earnings, 1)): the transform used wherever earnings enter a
// selection or propensity model.
inline double log_earnings(double earnings) {
    return std::log(earnings > 1.0 ? earnings : 1.0);
}

}  // namespace survint
