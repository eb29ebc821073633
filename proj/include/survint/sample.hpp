#pragma once

#include <cstdint>
#include <vector>

#include "survint/bigdata.hpp"

namespace survint {

// A drawn probability sample with design weights and linkage indicators.
struct WeightedSample {
    std::vector<std::uint32_t> unit_index;  // indices into the frame
    std::vector<double> design_weight;      // N_h / n_h
    std::vector<double> inclusion_prob;     // n_h / N_h
    std::vector<std::uint32_t> stratum_id;  // position in the stratification
    std::vector<std::uint8_t> delta;        // B membership after linkage

    std::size_t size() const { return unit_index.size(); }
};

inline void link_big_membership(WeightedSample& sample, const BigDataset& big) {
    sample.delta.resize(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i)
        sample.delta[i] = big.delta[sample.unit_index[i]];
}

}  // namespace survint
