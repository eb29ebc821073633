#include "survint/population.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "survint/error.hpp"

namespace survint {

namespace {

// Default size-group mix: heavily weighted to small employers, matching the
// published shape of business counts. Sums to 1 exactly.
constexpr std::array<double, kNumSizeGroups> kDefaultSizeShares = {
    0.6259, 0.2600, 0.0650, 0.0250, 0.0115, 0.0045, 0.0018,
    0.0008, 0.0013, 0.0009, 0.0008, 0.0005, 0.0013, 0.0007};

// Default industry mix across divisions B..S. Sums to 1 exactly.
constexpr std::array<double, kNumIndustries> kDefaultIndustryShares = {
    0.010,  // B mining
    0.070,  // C manufacturing
    0.010,  // D utilities
    0.160,  // E construction
    0.055,  // F wholesale
    0.115,  // G retail
    0.080,  // H accommodation & food
    0.055,  // I transport
    0.020,  // J information media
    0.045,  // K financial
    0.060,  // L rental & real estate
    0.125,  // M professional services
    0.040,  // N administrative
    0.010,  // O public administration
    0.025,  // P education
    0.055,  // Q health care
    0.020,  // R arts & recreation
    0.045,  // S other services
};

constexpr std::array<double, kNumStates> kDefaultStateShares = {
    0.344, 0.27, 0.21, 0.06, 0.09, 0.008, 0.003, 0.015};

constexpr std::array<double, kNumIndustries> kDefaultWageFactors = {
    1.5, 0.9, 1.1, 1.0, 0.95, 0.75, 0.7, 1.0, 1.25,
    1.2, 0.9, 1.2, 0.9, 1.1,  1.1,  1.0, 0.9, 0.75};

struct MomentRow {
    double mx, vx, sx, kx, my, vy, sy, ky, cov;
};

constexpr std::array<MomentRow, kNumSizeGroups> kDefaultMoments = {{
    {2, 3, 1.1, 1.2, 3.5, 10, 1.2, 1.4, 4},
    {8, 4.5, 1.1, 2, 8.5, 10, 1.2, 1.8, 4},
    {26, 28, 0.8, 1.8, 25, 35, 0.9, 1.6, 25},
    {68, 60, 0.6, 3.55, 51, 70, 0.9, 3.6, 55},
    {120, 70, 0.6, 2.2, 110, 70, 0.8, 2.4, 55},
    {160, 100, 0.4, 1.6, 145, 120, 0.7, 1.9, 70},
    {220, 2200, 0.5, 1.5, 200, 2400, 0.5, 1.3, 2000},
    {280, 6300, 0.7, 1.2, 250, 5400, 0.7, 1.5, 4800},
    {320, 14000, 0.7, 1.2, 270, 16000, 0.9, 1.3, 12000},
    {375, 25000, 0.8, 0.8, 300, 25000, 0.9, 1.1, 21000},
    {420, 45000, 1.03, 1.2, 370, 45000, 1.02, 1.1, 35000},
    {470, 58000, 1.1, 1.3, 420, 55000, 1.1, 1.5, 47000},
    {650, 80000, 0.85, 0.8, 550, 72000, 0.8, 0.8, 66000},
    {1350, 200000, 2.3, 9, 1200, 200000, 2, 8, 190000},
}};

// Per-size-group wage noise. factor_variance is the variance of the noise on
// the industry wage factor; additive_variance scales the additive error with
// frame employment.
constexpr std::array<WageNoise, kNumSizeGroups> kDefaultWageNoise = {{
    {0.10, 50},
    {0.10, 75},
    {0.15, 100},
    {0.15, 150},
    {0.15, 150},
    {0.15, 150},
    {0.15, 200},
    {0.20, 250},
    {0.20, 250},
    {0.20, 250},
    {0.20, 250},
    {0.20, 250},
    {0.20, 275},
    {0.15, 325},
}};

std::int64_t round_nonnegative(double v) {
    std::int64_t r = std::llround(v);  // half away from zero
    return r < 0 ? 0 : r;
}

double as_sd(double second_parameter, bool variance_as_sd) {
    return variance_as_sd ? second_parameter : std::sqrt(second_parameter);
}

void check_simplex(const double* p, std::size_t n, const std::string& what) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] < 0.0)
            throw ConfigError("invalid-proportions", what + " contains a negative entry");
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("invalid-proportions", what + " does not sum to 1 (got " +
                                                     std::to_string(sum) + ")");
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t fnv1a_double(std::uint64_t h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return fnv1a(h, &bits, sizeof bits);
}

}  // namespace

PopulationConfig default_population_config(std::uint64_t n) {
    PopulationConfig cfg;
    cfg.n = n;
    cfg.proportions.size_groups = kDefaultSizeShares;
    for (int g = 0; g < kNumSizeGroups; ++g)
        cfg.proportions.industry_given_size[static_cast<std::size_t>(g)] = kDefaultIndustryShares;
    cfg.proportions.state_given_cell.assign(
        static_cast<std::size_t>(kNumSizeGroups) * kNumIndustries, kDefaultStateShares);
    for (int g = 0; g < kNumSizeGroups; ++g) {
        const MomentRow& r = kDefaultMoments[static_cast<std::size_t>(g)];
        PairSpec& m = cfg.moments[static_cast<std::size_t>(g)];
        m.frame = {r.mx, r.vx, r.sx, r.kx};
        m.reported = {r.my, r.vy, r.sy, r.ky};
        m.covariance = r.cov;
    }
    cfg.wage_factors = kDefaultWageFactors;
    cfg.wage_noise = kDefaultWageNoise;
    for (int d = 0; d < kNumIndustries; ++d)
        cfg.overtime_probability[static_cast<std::size_t>(d)] =
            0.1 + 0.4 * static_cast<double>(d) / (kNumIndustries - 1);
    return cfg;
}

std::uint64_t population_config_hash(const PopulationConfig& c) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    h = fnv1a(h, &c.n, sizeof c.n);
    for (double v : c.proportions.size_groups) h = fnv1a_double(h, v);
    for (const auto& row : c.proportions.industry_given_size)
        for (double v : row) h = fnv1a_double(h, v);
    for (const auto& row : c.proportions.state_given_cell)
        for (double v : row) h = fnv1a_double(h, v);
    for (const auto& m : c.moments) {
        for (double v : {m.frame.mean, m.frame.variance, m.frame.skewness, m.frame.kurtosis,
                         m.reported.mean, m.reported.variance, m.reported.skewness,
                         m.reported.kurtosis, m.covariance})
            h = fnv1a_double(h, v);
    }
    h = fnv1a_double(h, c.national_average_earnings);
    for (double v : c.wage_factors) h = fnv1a_double(h, v);
    for (const auto& w : c.wage_noise) {
        h = fnv1a_double(h, w.factor_variance);
        h = fnv1a_double(h, w.additive_variance);
    }
    for (double v : c.overtime_probability) h = fnv1a_double(h, v);
    h = fnv1a_double(h, c.overtime_factor_mean);
    const auto& me = c.measurement_error;
    for (double v : {me.factor_mean, me.factor_variance, me.contamination_rate,
                     me.contamination_low, me.contamination_high})
        h = fnv1a_double(h, v);
    const std::uint64_t flags = c.variance_as_sd ? 1 : 0;
    h = fnv1a(h, &flags, sizeof flags);
    h = fnv1a(h, &c.seed, sizeof c.seed);
    return h;
}

std::vector<std::uint64_t> largest_remainder_counts(std::uint64_t n,
                                                    const std::vector<double>& weights) {
    const std::size_t m = weights.size();
    std::vector<std::uint64_t> counts(m, 0);
    std::vector<std::pair<double, std::size_t>> remainders(m);
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double quota = static_cast<double>(n) * weights[i];
        const double fl = std::floor(quota);
        counts[i] = static_cast<std::uint64_t>(fl);
        assigned += counts[i];
        remainders[i] = {quota - fl, i};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (assigned > n)
        throw NumericError("apportionment-overflow", "cell quotas exceed the population size");
    std::uint64_t leftover = n - assigned;
    for (std::size_t i = 0; i < m && leftover > 0; ++i, --leftover)
        counts[remainders[i].second] += 1;
    return counts;
}

PopulationFrame synthesize_population(const PopulationConfig& cfg) {
    check_simplex(cfg.proportions.size_groups.data(), kNumSizeGroups, "size group proportions");
    for (int g = 0; g < kNumSizeGroups; ++g)
        check_simplex(cfg.proportions.industry_given_size[static_cast<std::size_t>(g)].data(),
                      kNumIndustries,
                      "industry proportions for size group " +
                          std::string(kSizeGroupLabels[static_cast<std::size_t>(g)]));
    const std::size_t n_cells = static_cast<std::size_t>(kNumSizeGroups) * kNumIndustries;
    if (cfg.proportions.state_given_cell.size() != n_cells)
        throw ConfigError("invalid-proportions", "state table must cover every size x industry cell");
    for (std::size_t cell = 0; cell < n_cells; ++cell)
        check_simplex(cfg.proportions.state_given_cell[cell].data(), kNumStates,
                      "state proportions for cell " + std::to_string(cell));
    if (!(cfg.measurement_error.contamination_rate >= 0.0 &&
          cfg.measurement_error.contamination_rate <= 1.0))
        throw ConfigError("invalid-measurement-error", "contamination rate must lie in [0, 1]");

    std::vector<double> cell_weights(n_cells);
    for (int g = 0; g < kNumSizeGroups; ++g)
        for (int d = 0; d < kNumIndustries; ++d)
            cell_weights[static_cast<std::size_t>(g) * kNumIndustries +
                         static_cast<std::size_t>(d)] =
                cfg.proportions.size_groups[static_cast<std::size_t>(g)] *
                cfg.proportions.industry_given_size[static_cast<std::size_t>(g)]
                                                   [static_cast<std::size_t>(d)];
    const std::vector<std::uint64_t> counts = largest_remainder_counts(cfg.n, cell_weights);

    PopulationFrame frame;
    frame.units.resize(cfg.n);
    frame.provenance.kind = Provenance::Kind::synthesized;
    frame.provenance.seed = cfg.seed;
    frame.provenance.config_hash = population_config_hash(cfg);

    const double me_sd = as_sd(cfg.measurement_error.factor_variance, cfg.variance_as_sd);

    std::size_t next_unit = 0;
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        const std::uint64_t m = counts[cell];
        if (m == 0) continue;
        const int g = static_cast<int>(cell / kNumIndustries);
        const int d = static_cast<int>(cell % kNumIndustries);
        Rng rng(derive_seed(cfg.seed, Stream::population_cell, cell));

        const PairSpec& spec = cfg.moments[static_cast<std::size_t>(g)];
        auto [xs, ys] = vale_maurelli_pair(spec.frame, spec.reported, spec.covariance, m, rng);

        const WageNoise& noise = cfg.wage_noise[static_cast<std::size_t>(g)];
        const double factor_sd = as_sd(noise.factor_variance, cfg.variance_as_sd);
        const double wage_factor = cfg.wage_factors[static_cast<std::size_t>(d)];
        const double p_overtime = cfg.overtime_probability[static_cast<std::size_t>(d)];
        const auto& state_p = cfg.proportions.state_given_cell[cell];

        for (std::uint64_t i = 0; i < m; ++i) {
            UnitRecord& u = frame.units[next_unit];
            u.unit_id = static_cast<std::int64_t>(next_unit) + 1;
            u.size_group = static_cast<std::uint8_t>(g);
            u.industry = static_cast<std::uint8_t>(d);
            u.frame_employment = round_nonnegative(xs[i]);
            u.reported_employment = round_nonnegative(ys[i]);

            double su = rng.uniform();
            int state = kNumStates - 1;
            double acc = 0.0;
            for (int s = 0; s < kNumStates; ++s) {
                acc += state_p[static_cast<std::size_t>(s)];
                if (su < acc) {
                    state = s;
                    break;
                }
            }
            u.state = static_cast<std::uint8_t>(state);

            const double f = wage_factor + rng.normal(0.0, factor_sd);
            const double eps_sd =
                as_sd(noise.additive_variance * static_cast<double>(u.frame_employment),
                      cfg.variance_as_sd);
            double earnings = cfg.national_average_earnings * f *
                                  static_cast<double>(u.reported_employment) +
                              rng.normal(0.0, eps_sd);
            u.earnings = earnings > 0.0 ? earnings : 0.0;

            if (rng.bernoulli(p_overtime)) {
                const double share = std::min(rng.exponential(cfg.overtime_factor_mean), 1.0);
                u.overtime = share * u.earnings;
            } else {
                u.overtime = 0.0;
            }

            double ratio = rng.normal(cfg.measurement_error.factor_mean, me_sd);
            if (rng.bernoulli(cfg.measurement_error.contamination_rate)) {
                ratio *= rng.uniform(cfg.measurement_error.contamination_low,
                                     cfg.measurement_error.contamination_high);
                u.me_contaminated = true;
            }
            u.earnings_star = ratio * u.earnings;
            u.emp_star = ratio * static_cast<double>(u.reported_employment);
            u.ovt_star = ratio * u.overtime;
            ++next_unit;
        }
    }
    return frame;
}

namespace {

constexpr const char* kCsvHeader =
    "unit_id,state,industry_division,size_group,frame_employment,reported_employment,"
    "earnings,overtime,earnings_star,emp_star,ovt_star";

void append_double(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

double parse_double(std::string_view field, std::size_t line_no, const char* column) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw ConfigError("non-numeric-field", "line " + std::to_string(line_no) +
                                                   ": column '" + column +
                                                   "' is not numeric: '" + std::string(field) +
                                                   "'");
    return v;
}

std::int64_t parse_int(std::string_view field, std::size_t line_no, const char* column) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw ConfigError("non-numeric-field", "line " + std::to_string(line_no) +
                                                   ": column '" + column +
                                                   "' is not an integer: '" + std::string(field) +
                                                   "'");
    return v;
}

}  // namespace

void save_population(const PopulationFrame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("io-failure", "cannot open '" + path + "' for writing");
    std::string buf;
    buf.reserve(1 << 20);
    buf += kCsvHeader;
    buf += '\n';
    for (const UnitRecord& u : frame.units) {
        buf += std::to_string(u.unit_id);
        buf += ',';
        buf += kStateLabels[u.state];
        buf += ',';
        buf += industry_letter(u.industry);
        buf += ',';
        buf += kSizeGroupLabels[u.size_group];
        buf += ',';
        buf += std::to_string(u.frame_employment);
        buf += ',';
        buf += std::to_string(u.reported_employment);
        buf += ',';
        append_double(buf, u.earnings);
        buf += ',';
        append_double(buf, u.overtime);
        buf += ',';
        append_double(buf, u.earnings_star);
        buf += ',';
        append_double(buf, u.emp_star);
        buf += ',';
        append_double(buf, u.ovt_star);
        buf += '\n';
        if (buf.size() > (1 << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw ConfigError("io-failure", "write to '" + path + "' failed");
}

PopulationFrame load_population(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("io-failure", "cannot open '" + path + "' for reading");
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    PopulationFrame frame;
    frame.provenance.kind = Provenance::Kind::ingested;
    frame.provenance.file_hash = fnv1a(0xCBF29CE484222325ULL, contents.data(), contents.size());

    std::size_t pos = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= contents.size()) return false;
        std::size_t end = contents.find('\n', pos);
        if (end == std::string::npos) end = contents.size();
        line = std::string_view(contents).substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        return true;
    };

    std::string_view header;
    if (!next_line(header))
        throw ConfigError("schema-mismatch", "'" + path + "' is empty");
    {
        auto split = [](std::string_view s) {
            std::vector<std::string_view> out;
            std::size_t start = 0;
            while (true) {
                std::size_t end = s.find(',', start);
                out.push_back(s.substr(start, end - start));
                if (end == std::string_view::npos) break;
                start = end + 1;
            }
            return out;
        };
        const std::vector<std::string_view> expected = split(kCsvHeader);
        const std::vector<std::string_view> found = split(header);
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i >= found.size() || found[i] != expected[i]) {
                // Name the first expected column that is absent from the file.
                for (std::string_view col : expected) {
                    if (std::find(found.begin(), found.end(), col) == found.end())
                        throw ConfigError("schema-mismatch",
                                          "missing column '" + std::string(col) + "'");
                }
                throw ConfigError("schema-mismatch",
                                  "column " + std::to_string(i) + " should be '" +
                                      std::string(expected[i]) + "', found '" +
                                      (i < found.size() ? std::string(found[i]) : std::string()) +
                                      "'");
            }
        }
        if (found.size() > expected.size())
            throw ConfigError("schema-mismatch", "unexpected extra columns in header");
    }

    std::string_view line;
    std::size_t line_no = 1;
    std::array<std::string_view, 11> fields;
    while (next_line(line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t start = 0;
        for (int f = 0; f < 11; ++f) {
            std::size_t end = f == 10 ? line.size() : line.find(',', start);
            if (end == std::string_view::npos)
                throw ConfigError("schema-mismatch",
                                  "line " + std::to_string(line_no) + ": expected 11 fields");
            fields[static_cast<std::size_t>(f)] = line.substr(start, end - start);
            start = end + 1;
        }
        UnitRecord u;
        u.unit_id = parse_int(fields[0], line_no, "unit_id");
        int state = state_from_label(fields[1]);
        if (state < 0)
            throw ConfigError("schema-mismatch", "line " + std::to_string(line_no) +
                                                     ": unknown state '" + std::string(fields[1]) +
                                                     "'");
        u.state = static_cast<std::uint8_t>(state);
        int industry = fields[2].size() == 1 ? industry_from_letter(fields[2][0]) : -1;
        if (industry < 0)
            throw ConfigError("schema-mismatch", "line " + std::to_string(line_no) +
                                                     ": unknown industry_division '" +
                                                     std::string(fields[2]) + "'");
        u.industry = static_cast<std::uint8_t>(industry);
        int group = size_group_from_label(fields[3]);
        if (group < 0)
            throw ConfigError("schema-mismatch", "line " + std::to_string(line_no) +
                                                     ": unknown size_group '" +
                                                     std::string(fields[3]) + "'");
        u.size_group = static_cast<std::uint8_t>(group);
        u.frame_employment = parse_int(fields[4], line_no, "frame_employment");
        u.reported_employment = parse_int(fields[5], line_no, "reported_employment");
        u.earnings = parse_double(fields[6], line_no, "earnings");
        u.overtime = parse_double(fields[7], line_no, "overtime");
        u.earnings_star = parse_double(fields[8], line_no, "earnings_star");
        u.emp_star = parse_double(fields[9], line_no, "emp_star");
        u.ovt_star = parse_double(fields[10], line_no, "ovt_star");
        frame.units.push_back(u);
    }

    const std::size_t n = frame.units.size();
    std::vector<bool> seen(n + 1, false);
    for (const UnitRecord& u : frame.units) {
        if (u.unit_id < 1 || static_cast<std::size_t>(u.unit_id) > n)
            throw ConfigError("invalid-unit-id",
                              "unit_id " + std::to_string(u.unit_id) +
                                  " outside 1.." + std::to_string(n));
        if (seen[static_cast<std::size_t>(u.unit_id)])
            throw ConfigError("duplicate-unit-id",
                              "unit_id " + std::to_string(u.unit_id) + " appears twice");
        seen[static_cast<std::size_t>(u.unit_id)] = true;
    }
    return frame;
}

}  // namespace survint
