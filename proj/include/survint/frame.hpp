#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace survint {

inline constexpr int kNumStates = 8;
inline constexpr int kNumIndustries = 18;  // ANZSIC-style divisions B..S
inline constexpr int kNumSizeGroups = 14;
inline constexpr int kNumSizeBands = 4;  // 0-4, 5-19, 20-299, 300+

inline constexpr std::array<std::string_view, kNumStates> kStateLabels = {
    "NSW", "VIC", "QLD", "SA", "WA", "TAS", "NT", "ACT"};

inline constexpr std::array<std::string_view, kNumSizeGroups> kSizeGroupLabels = {
    "0-4",     "5-19",    "20-49",   "50-99",   "100-149", "150-199", "200-249",
    "249-299", "300-349", "349-399", "400-449", "449-499", "500-999", "1000+"};

inline constexpr std::array<std::string_view, kNumSizeBands> kSizeBandLabels = {
    "0-4", "5-19", "20-299", "300+"};

inline char industry_letter(int industry) { return static_cast<char>('B' + industry); }

// Returns -1 when the letter is not a division in B..S.
inline int industry_from_letter(char letter) {
    int idx = letter - 'B';
    return (idx >= 0 && idx < kNumIndustries) ? idx : -1;
}

inline int state_from_label(std::string_view label) {
    for (int s = 0; s < kNumStates; ++s)
        if (kStateLabels[static_cast<std::size_t>(s)] == label) return s;
    return -1;
}

inline int size_group_from_label(std::string_view label) {
    for (int g = 0; g < kNumSizeGroups; ++g)
        if (kSizeGroupLabels[static_cast<std::size_t>(g)] == label) return g;
    return -1;
}

// Design size band, derived from the frame employment count.
inline int size_band(std::int64_t frame_employment) {
    if (frame_employment <= 4) return 0;
    if (frame_employment <= 19) return 1;
    if (frame_employment <= 299) return 2;
    return 3;
}

struct UnitRecord {
    std::int64_t unit_id = 0;
    std::uint8_t state = 0;      // index into kStateLabels
    std::uint8_t industry = 0;   // 0 == division B
    std::uint8_t size_group = 0; // index into kSizeGroupLabels
    std::int64_t frame_employment = 0;
    std::int64_t reported_employment = 0;
    double earnings = 0.0;  // AUD/week
    double overtime = 0.0;  // AUD/week
    double earnings_star = 0.0;
    double emp_star = 0.0;
    double ovt_star = 0.0;
    // Diagnostic only: set by the synthesizer when the extra contamination hit
    // this unit. Not part of the CSV schema; false on ingested frames.
    bool me_contaminated = false;
};

struct Provenance {
    enum class Kind { synthesized, ingested } kind = Kind::synthesized;
    std::uint64_t seed = 0;         // synthesized only
    std::uint64_t config_hash = 0;  // synthesized only
    std::uint64_t file_hash = 0;    // ingested only
};

struct PopulationFrame {
    std::vector<UnitRecord> units;
    Provenance provenance;

    std::size_t size() const { return units.size(); }
};

}  // namespace survint
