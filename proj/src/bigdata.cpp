#include "survint/bigdata.hpp"

#include <cmath>

#include "survint/error.hpp"

namespace survint {

SelectionModel default_sar_model() {
    SelectionModel m;
    m.phi0 = 0.09;
    m.phi1 = 0.009;
    m.phi2 = 0.0;
    // Reduced coverage in three lower-wage divisions.
    m.industry_downweights[static_cast<std::size_t>(industry_from_letter('G'))] = 0.7;
    m.industry_downweights[static_cast<std::size_t>(industry_from_letter('H'))] = 0.7;
    m.industry_downweights[static_cast<std::size_t>(industry_from_letter('S'))] = 0.7;
    return m;
}

SelectionModel default_snar_model() {
    SelectionModel m = default_sar_model();
    m.phi0 = 0.85;
    m.phi1 = 0.009;
    m.phi2 = -0.1;
    return m;
}

std::vector<double> selection_probabilities(const PopulationFrame& frame,
                                            const SelectionModel& model) {
    for (double w : model.industry_downweights)
        if (!(w > 0.0 && w <= 1.0))
            throw ConfigError("invalid-downweight", "industry downweights must lie in (0, 1]");

    std::vector<double> pi(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const UnitRecord& u = frame.units[i];
        double eta = model.phi0 + model.phi1 * static_cast<double>(u.frame_employment);
        if (model.phi2 != 0.0) {
            if (u.earnings < 0.0)
                throw NumericError("nonpositive-earnings-with-snar",
                                   "unit " + std::to_string(u.unit_id) +
                                       " has negative earnings under an outcome-dependent model");
            eta += model.phi2 * log_earnings(u.earnings);
        }
        const double p = 1.0 / (1.0 + std::exp(-eta));
        pi[i] = p * model.industry_downweights[u.industry];
    }
    return pi;
}

BigDataset draw_big_dataset(const PopulationFrame& frame, std::span<const double> pi,
                            bool use_starred, Rng& rng) {
    if (pi.size() != frame.size())
        throw ConfigError("invalid-probabilities", "probability vector does not match the frame");
    BigDataset b;
    b.delta.assign(frame.size(), 0);
    b.true_pi.assign(pi.begin(), pi.end());
    b.use_starred = use_starred;
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double p = pi[i];
        if (!(p > 0.0 && p <= 1.0))
            throw NumericError("invalid-probabilities",
                               "membership probability outside (0, 1] at unit " +
                                   std::to_string(i + 1));
        if (rng.bernoulli(p)) {
            b.delta[i] = 1;
            b.member_ids.push_back(static_cast<std::uint32_t>(i));
        }
    }
    b.n_b = b.member_ids.size();
    return b;
}

}  // namespace survint
