#include "survint/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "survint/error.hpp"

namespace survint {

namespace {

constexpr const char* kResultsHeader =
    "scenario,design,estimator,variable,rb,rrmse,n_replicates,n_failures";

std::string design_label(EstimatorDesign design) {
    switch (design) {
        case EstimatorDesign::single: return "single";
        case EstimatorDesign::dual_screening: return "dual_screening";
        case EstimatorDesign::cutoff: return "cutoff";
        case EstimatorDesign::bigdata_only: return "bigdata_only";
    }
    return "unknown";
}

std::string format_double(double v, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

const char* kDesignOrder[] = {"single", "dual_screening", "cutoff", "bigdata_only"};

}  // namespace

std::string render_results_csv(const ScenarioResult& result) {
    std::string out = kResultsHeader;
    out += '\n';
    for (const EstimatorSummary& est : result.estimators) {
        for (int v = 0; v < 4; ++v) {
            const CellStats& cell = est.by_variable[static_cast<std::size_t>(v)];
            out += result.scenario_id;
            out += ',';
            out += design_label(est.design);
            out += ',';
            out += est.id;
            out += ',';
            out += v < 3 ? kVariableNames[static_cast<std::size_t>(v)] : "awe";
            out += ',';
            out += format_double(cell.rb, "%.6f");
            out += ',';
            out += format_double(cell.rrmse, "%.6f");
            out += ',';
            out += std::to_string(cell.n_used);
            out += ',';
            out += std::to_string(cell.n_failures);
            out += '\n';
        }
    }
    return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
    std::vector<ResultRow> rows;
    std::size_t pos = 0;
    bool first = true;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (first) {
            if (line != kResultsHeader)
                throw ConfigError("schema-mismatch",
                                  "results CSV header mismatch on line 1");
            first = false;
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 8)
            throw ConfigError("schema-mismatch",
                              "line " + std::to_string(line_no) + ": expected 8 fields");
        ResultRow row;
        row.scenario = std::string(fields[0]);
        row.design = std::string(fields[1]);
        row.estimator = std::string(fields[2]);
        row.variable = std::string(fields[3]);
        auto parse_num = [&](std::string_view f, auto& dst, const char* what) {
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), dst);
            if (ec != std::errc() || p != f.data() + f.size())
                throw ConfigError("non-numeric-field", "line " + std::to_string(line_no) +
                                                           ": bad " + what);
        };
        parse_num(fields[4], row.rb, "rb");
        parse_num(fields[5], row.rrmse, "rrmse");
        parse_num(fields[6], row.n_replicates, "n_replicates");
        parse_num(fields[7], row.n_failures, "n_failures");
        rows.push_back(std::move(row));
    }
    if (first) throw ConfigError("schema-mismatch", "results CSV is empty");
    return rows;
}

namespace {

struct TableLine {
    std::string estimator;
    double rb[4] = {0, 0, 0, 0};
    double rrmse[4] = {0, 0, 0, 0};
    std::uint32_t failures = 0;
};

void append_design_table(std::string& out, const std::string& design,
                         const std::vector<TableLine>& lines) {
    out += "### Design: " + design + "\n\n";
    out += "| Estimator | RB Earn | RB Emp | RB Ovt | RB AWE | RRMSE Earn | RRMSE Emp | "
           "RRMSE Ovt | RRMSE AWE | Failures |\n";
    out += "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const TableLine& line : lines) {
        out += "| " + line.estimator;
        for (int v = 0; v < 4; ++v) out += " | " + format_double(100.0 * line.rb[v], "%.1f");
        for (int v = 0; v < 4; ++v) out += " | " + format_double(100.0 * line.rrmse[v], "%.1f");
        out += " | " + std::to_string(line.failures) + " |\n";
    }
    out += '\n';
}

int variable_slot(const std::string& name) {
    for (int v = 0; v < 3; ++v)
        if (name == kVariableNames[static_cast<std::size_t>(v)]) return v;
    if (name == "awe") return 3;
    return -1;
}

}  // namespace

std::string render_markdown(const std::vector<ResultRow>& rows) {
    // Preserve first-appearance order of scenarios and estimators.
    std::vector<std::string> scenarios;
    for (const ResultRow& row : rows)
        if (std::find(scenarios.begin(), scenarios.end(), row.scenario) == scenarios.end())
            scenarios.push_back(row.scenario);

    std::string out;
    if (scenarios.empty()) {
        out += "## Scenario results\n\n";
        out += "| Estimator | RB Earn | RB Emp | RB Ovt | RB AWE | RRMSE Earn | RRMSE Emp | "
               "RRMSE Ovt | RRMSE AWE | Failures |\n";
        out += "|---|---|---|---|---|---|---|---|---|---|\n\n";
        return out;
    }
    for (const std::string& scenario : scenarios) {
        out += "## Scenario " + scenario + "\n\n";
        for (const char* design : kDesignOrder) {
            std::vector<TableLine> lines;
            for (const ResultRow& row : rows) {
                if (row.scenario != scenario || row.design != design) continue;
                auto it = std::find_if(lines.begin(), lines.end(), [&](const TableLine& l) {
                    return l.estimator == row.estimator;
                });
                if (it == lines.end()) {
                    lines.push_back(TableLine{row.estimator, {}, {}, 0});
                    it = lines.end() - 1;
                }
                const int v = variable_slot(row.variable);
                if (v < 0)
                    throw ConfigError("schema-mismatch", "unknown variable '" + row.variable + "'");
                it->rb[v] = row.rb;
                it->rrmse[v] = row.rrmse;
                it->failures = std::max(it->failures, row.n_failures);
            }
            if (!lines.empty()) append_design_table(out, design, lines);
        }
    }
    return out;
}

std::string render_markdown(const ScenarioResult& result) {
    std::vector<ResultRow> rows = parse_results_csv(render_results_csv(result));
    std::string out = render_markdown(rows);
    if (!result.mean_sample_size.empty()) {
        out += "### Reference sample sizes\n\n";
        out += "| Design | Mean n | Reduction vs single |\n|---|---|---|\n";
        double single_n = 0.0;
        auto single_it = result.mean_sample_size.find(DesignKind::single);
        if (single_it != result.mean_sample_size.end()) single_n = single_it->second;
        for (const auto& [design, n] : result.mean_sample_size) {
            out += "| " + design_name(design) + " | " + format_double(n, "%.1f") + " | ";
            if (single_n > 0.0) {
                out += format_double(100.0 * (1.0 - n / single_n), "%.1f") + "%";
            } else {
                out += "-";
            }
            out += " |\n";
        }
        out += '\n';
    }
    return out;
}

}  // namespace survint
