#include "survint/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "survint/error.hpp"

namespace survint {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& context) {
    if (!obj.is_object())
        throw ConfigError("config-invalid", context + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* name : allowed)
            if (key == name) ok = true;
        if (!ok)
            throw ConfigError("config-invalid", "unknown key '" + key + "' in " + context);
    }
}

double number_at(const json& obj, const char* key, const std::string& context) {
    if (!obj.at(key).is_number())
        throw ConfigError("config-invalid", context + "." + key + " must be a number");
    return obj.at(key).get<double>();
}

int size_group_index(const std::string& label) {
    const int g = size_group_from_label(label);
    if (g < 0) throw ConfigError("config-invalid", "unknown size group '" + label + "'");
    return g;
}

int industry_index(const std::string& label) {
    const int d = label.size() == 1 ? industry_from_letter(label[0]) : -1;
    if (d < 0) throw ConfigError("config-invalid", "unknown industry division '" + label + "'");
    return d;
}

int state_index(const std::string& label) {
    const int s = state_from_label(label);
    if (s < 0) throw ConfigError("config-invalid", "unknown state '" + label + "'");
    return s;
}

MomentSpec moment_spec_from_json(const json& obj, const std::string& context) {
    check_keys(obj, {"mean", "variance", "skewness", "kurtosis"}, context);
    MomentSpec spec;
    spec.mean = number_at(obj, "mean", context);
    spec.variance = number_at(obj, "variance", context);
    spec.skewness = number_at(obj, "skewness", context);
    spec.kurtosis = number_at(obj, "kurtosis", context);
    return spec;
}

json moment_spec_to_json(const MomentSpec& spec) {
    return {{"mean", spec.mean},
            {"variance", spec.variance},
            {"skewness", spec.skewness},
            {"kurtosis", spec.kurtosis}};
}

}  // namespace

PopulationConfig population_config_from_json(const json& doc) {
    check_keys(doc,
               {"n", "proportions", "moments", "wage_factors", "wage_variances", "overtime",
                "measurement_error", "seed", "national_average", "variance_as_sd"},
               "population config");
    PopulationConfig cfg = default_population_config();
    if (doc.contains("n")) cfg.n = doc.at("n").get<std::uint64_t>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("national_average"))
        cfg.national_average_earnings = number_at(doc, "national_average", "population config");
    if (doc.contains("variance_as_sd")) cfg.variance_as_sd = doc.at("variance_as_sd").get<bool>();

    if (doc.contains("proportions")) {
        const json& props = doc.at("proportions");
        check_keys(props, {"size_groups", "industries", "states", "industry_within_size",
                           "state_within"},
                   "proportions");
        if (props.contains("size_groups")) {
            for (const auto& [label, value] : props.at("size_groups").items())
                cfg.proportions.size_groups[static_cast<std::size_t>(size_group_index(label))] =
                    value.get<double>();
        }
        if (props.contains("industries")) {
            std::array<double, kNumIndustries> shares =
                cfg.proportions.industry_given_size[0];
            for (const auto& [label, value] : props.at("industries").items())
                shares[static_cast<std::size_t>(industry_index(label))] = value.get<double>();
            for (auto& row : cfg.proportions.industry_given_size) row = shares;
        }
        if (props.contains("states")) {
            std::array<double, kNumStates> shares{};
            shares = cfg.proportions.state_given_cell[0];
            for (const auto& [label, value] : props.at("states").items())
                shares[static_cast<std::size_t>(state_index(label))] = value.get<double>();
            for (auto& row : cfg.proportions.state_given_cell) row = shares;
        }
        if (props.contains("industry_within_size")) {
            for (const auto& [size_label, row] : props.at("industry_within_size").items()) {
                const int g = size_group_index(size_label);
                for (const auto& [label, value] : row.items())
                    cfg.proportions.industry_given_size[static_cast<std::size_t>(g)]
                                                       [static_cast<std::size_t>(
                                                           industry_index(label))] =
                        value.get<double>();
            }
        }
        if (props.contains("state_within")) {
            // keys are "<size>|<industry letter>"
            for (const auto& [cell_label, row] : props.at("state_within").items()) {
                const std::size_t bar = cell_label.find('|');
                if (bar == std::string::npos)
                    throw ConfigError("config-invalid",
                                      "state_within keys look like '0-4|B', got '" + cell_label +
                                          "'");
                const int g = size_group_index(cell_label.substr(0, bar));
                const int d = industry_index(cell_label.substr(bar + 1));
                auto& cell =
                    cfg.proportions.state_given_cell[static_cast<std::size_t>(g) * kNumIndustries +
                                                     static_cast<std::size_t>(d)];
                for (const auto& [label, value] : row.items())
                    cell[static_cast<std::size_t>(state_index(label))] = value.get<double>();
            }
        }
    }

    if (doc.contains("moments")) {
        for (const auto& [label, row] : doc.at("moments").items()) {
            const int g = size_group_index(label);
            check_keys(row, {"frame", "reported", "covariance"}, "moments." + label);
            PairSpec& pair = cfg.moments[static_cast<std::size_t>(g)];
            if (row.contains("frame"))
                pair.frame = moment_spec_from_json(row.at("frame"), "moments." + label);
            if (row.contains("reported"))
                pair.reported = moment_spec_from_json(row.at("reported"), "moments." + label);
            if (row.contains("covariance"))
                pair.covariance = number_at(row, "covariance", "moments." + label);
        }
    }

    if (doc.contains("wage_factors")) {
        for (const auto& [label, value] : doc.at("wage_factors").items())
            cfg.wage_factors[static_cast<std::size_t>(industry_index(label))] =
                value.get<double>();
    }

    if (doc.contains("wage_variances")) {
        for (const auto& [label, row] : doc.at("wage_variances").items()) {
            const int g = size_group_index(label);
            check_keys(row, {"factor_variance", "additive_variance"},
                       "wage_variances." + label);
            WageNoise& noise = cfg.wage_noise[static_cast<std::size_t>(g)];
            if (row.contains("factor_variance"))
                noise.factor_variance = number_at(row, "factor_variance",
                                                  "wage_variances." + label);
            if (row.contains("additive_variance"))
                noise.additive_variance = number_at(row, "additive_variance",
                                                    "wage_variances." + label);
        }
    }

    if (doc.contains("overtime")) {
        const json& ovt = doc.at("overtime");
        check_keys(ovt, {"probabilities", "factor_mean"}, "overtime");
        if (ovt.contains("factor_mean"))
            cfg.overtime_factor_mean = number_at(ovt, "factor_mean", "overtime");
        if (ovt.contains("probabilities")) {
            for (const auto& [label, value] : ovt.at("probabilities").items())
                cfg.overtime_probability[static_cast<std::size_t>(industry_index(label))] =
                    value.get<double>();
        }
    }

    if (doc.contains("measurement_error")) {
        const json& me = doc.at("measurement_error");
        check_keys(me,
                   {"factor_mean", "factor_variance", "contamination_rate", "contamination_low",
                    "contamination_high"},
                   "measurement_error");
        if (me.contains("factor_mean"))
            cfg.measurement_error.factor_mean = number_at(me, "factor_mean", "measurement_error");
        if (me.contains("factor_variance"))
            cfg.measurement_error.factor_variance =
                number_at(me, "factor_variance", "measurement_error");
        if (me.contains("contamination_rate"))
            cfg.measurement_error.contamination_rate =
                number_at(me, "contamination_rate", "measurement_error");
        if (me.contains("contamination_low"))
            cfg.measurement_error.contamination_low =
                number_at(me, "contamination_low", "measurement_error");
        if (me.contains("contamination_high"))
            cfg.measurement_error.contamination_high =
                number_at(me, "contamination_high", "measurement_error");
    }
    return cfg;
}

json population_config_to_json(const PopulationConfig& cfg) {
    json props;
    for (int g = 0; g < kNumSizeGroups; ++g)
        props["size_groups"][std::string(kSizeGroupLabels[static_cast<std::size_t>(g)])] =
            cfg.proportions.size_groups[static_cast<std::size_t>(g)];
    for (int d = 0; d < kNumIndustries; ++d)
        props["industries"][std::string(1, industry_letter(d))] =
            cfg.proportions.industry_given_size[0][static_cast<std::size_t>(d)];
    for (int s = 0; s < kNumStates; ++s)
        props["states"][std::string(kStateLabels[static_cast<std::size_t>(s)])] =
            cfg.proportions.state_given_cell[0][static_cast<std::size_t>(s)];

    json moments;
    for (int g = 0; g < kNumSizeGroups; ++g) {
        const PairSpec& pair = cfg.moments[static_cast<std::size_t>(g)];
        json row;
        row["frame"] = moment_spec_to_json(pair.frame);
        row["reported"] = moment_spec_to_json(pair.reported);
        row["covariance"] = pair.covariance;
        moments[std::string(kSizeGroupLabels[static_cast<std::size_t>(g)])] = row;
    }

    json wage_factors;
    for (int d = 0; d < kNumIndustries; ++d)
        wage_factors[std::string(1, industry_letter(d))] =
            cfg.wage_factors[static_cast<std::size_t>(d)];

    json wage_variances;
    for (int g = 0; g < kNumSizeGroups; ++g) {
        const WageNoise& noise = cfg.wage_noise[static_cast<std::size_t>(g)];
        wage_variances[std::string(kSizeGroupLabels[static_cast<std::size_t>(g)])] = {
            {"factor_variance", noise.factor_variance},
            {"additive_variance", noise.additive_variance}};
    }

    json overtime;
    overtime["factor_mean"] = cfg.overtime_factor_mean;
    for (int d = 0; d < kNumIndustries; ++d)
        overtime["probabilities"][std::string(1, industry_letter(d))] =
            cfg.overtime_probability[static_cast<std::size_t>(d)];

    return json{{"n", cfg.n},
                {"seed", cfg.seed},
                {"national_average", cfg.national_average_earnings},
                {"variance_as_sd", cfg.variance_as_sd},
                {"proportions", props},
                {"moments", moments},
                {"wage_factors", wage_factors},
                {"wage_variances", wage_variances},
                {"overtime", overtime},
                {"measurement_error",
                 {{"factor_mean", cfg.measurement_error.factor_mean},
                  {"factor_variance", cfg.measurement_error.factor_variance},
                  {"contamination_rate", cfg.measurement_error.contamination_rate},
                  {"contamination_low", cfg.measurement_error.contamination_low},
                  {"contamination_high", cfg.measurement_error.contamination_high}}}};
}

namespace {

DesignKind design_from_string(const std::string& name) {
    if (name == "single") return DesignKind::single;
    if (name == "dual_screening") return DesignKind::dual_screening;
    if (name == "cutoff") return DesignKind::cutoff;
    throw ConfigError("config-invalid", "unknown design '" + name + "'");
}

ConstraintSpec constraint_from_json(const json& obj) {
    check_keys(obj, {"domain", "rse"}, "constraints[]");
    ConstraintSpec c;
    const std::string domain = obj.at("domain").get<std::string>();
    if (domain == "national") {
        c.kind = DomainKind::national;
    } else if (domain.rfind("industry:", 0) == 0) {
        c.kind = DomainKind::industry;
        c.index = industry_index(domain.substr(9));
    } else if (domain.rfind("state:", 0) == 0) {
        c.kind = DomainKind::state;
        c.index = state_index(domain.substr(6));
    } else {
        throw ConfigError("config-invalid",
                          "domain must be 'national', 'industry:<div>' or 'state:<abbr>', got '" +
                              domain + "'");
    }
    c.target_rse = number_at(obj, "rse", "constraints[]");
    return c;
}

}  // namespace

ScenarioFile scenario_file_from_json(const json& doc) {
    check_keys(doc,
               {"scenario", "selection_model", "designs", "estimators", "replicates", "seed",
                "population", "constraints", "min_stratum_n", "kw_cal_benchmarks"},
               "scenario config");
    ScenarioFile out;
    ScenarioConfig& cfg = out.scenario;

    if (doc.contains("scenario")) {
        const json& sc = doc.at("scenario");
        check_keys(sc, {"missingness", "measurement_error"}, "scenario");
        if (sc.contains("missingness")) {
            std::string m = sc.at("missingness").get<std::string>();
            for (char& ch : m) ch = static_cast<char>(std::tolower(ch));
            if (m == "sar") {
                cfg.missingness = Missingness::sar;
            } else if (m == "snar") {
                cfg.missingness = Missingness::snar;
            } else {
                throw ConfigError("config-invalid", "missingness must be SAR or SNAR");
            }
        }
        if (sc.contains("measurement_error"))
            cfg.measurement_error = sc.at("measurement_error").get<bool>();
    }

    if (doc.contains("selection_model")) {
        const json& sel = doc.at("selection_model");
        check_keys(sel, {"phi", "downweights", "use_starred"}, "selection_model");
        SelectionModel model =
            cfg.missingness == Missingness::sar ? default_sar_model() : default_snar_model();
        if (sel.contains("phi")) {
            const json& phi = sel.at("phi");
            if (!phi.is_array() || phi.size() != 3)
                throw ConfigError("config-invalid", "selection_model.phi must have 3 entries");
            model.phi0 = phi[0].get<double>();
            model.phi1 = phi[1].get<double>();
            model.phi2 = phi[2].get<double>();
        }
        if (sel.contains("downweights")) {
            model.industry_downweights.fill(1.0);
            for (const auto& [label, value] : sel.at("downweights").items())
                model.industry_downweights[static_cast<std::size_t>(industry_index(label))] =
                    value.get<double>();
        }
        if (sel.contains("use_starred")) cfg.use_starred = sel.at("use_starred").get<bool>();
        cfg.selection = model;
    }

    if (doc.contains("designs")) {
        cfg.designs.clear();
        for (const auto& name : doc.at("designs"))
            cfg.designs.push_back(design_from_string(name.get<std::string>()));
        if (cfg.designs.empty())
            throw ConfigError("config-invalid", "designs must not be empty");
    }

    if (doc.contains("estimators")) {
        cfg.estimators.clear();
        for (const auto& name : doc.at("estimators"))
            cfg.estimators.push_back(name.get<std::string>());
    }

    if (doc.contains("replicates")) cfg.replicates = doc.at("replicates").get<std::uint32_t>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("min_stratum_n"))
        cfg.min_stratum_n = doc.at("min_stratum_n").get<std::uint32_t>();
    if (doc.contains("kw_cal_benchmarks")) {
        const std::string mode = doc.at("kw_cal_benchmarks").get<std::string>();
        if (mode == "frame") {
            cfg.kw_cal_estimated_benchmarks = false;
        } else if (mode == "estimated") {
            cfg.kw_cal_estimated_benchmarks = true;
        } else {
            throw ConfigError("config-invalid", "kw_cal_benchmarks must be frame or estimated");
        }
    }

    if (doc.contains("constraints")) {
        cfg.constraints.clear();
        for (const auto& c : doc.at("constraints")) cfg.constraints.push_back(constraint_from_json(c));
        if (cfg.constraints.empty())
            throw ConfigError("config-invalid", "constraints must not be empty");
    }

    if (doc.contains("population")) {
        const json& pop = doc.at("population");
        check_keys(pop, {"synthesize", "load"}, "population");
        if (pop.contains("synthesize") == pop.contains("load"))
            throw ConfigError("config-invalid",
                              "population needs exactly one of 'synthesize' or 'load'");
        if (pop.contains("synthesize")) {
            out.population.synthesize = population_config_from_json(pop.at("synthesize"));
        } else {
            out.population.load_path = pop.at("load").get<std::string>();
        }
    } else {
        out.population.synthesize = default_population_config(90000);
    }
    return out;
}

PopulationFrame realize_population(const PopulationSource& source) {
    if (source.load_path.has_value()) return load_population(*source.load_path);
    if (source.synthesize.has_value()) return synthesize_population(*source.synthesize);
    throw ConfigError("config-invalid", "no population source configured");
}

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("io-failure", "cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config-invalid", "'" + path + "' is not valid JSON: " + e.what());
    }
    return doc;
}

void apply_override(json& doc, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("config-invalid", "overrides look like key=value, got '" + assignment +
                                                "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;  // plain string
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty())
            throw ConfigError("config-invalid", "bad override path '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

}  // namespace survint
