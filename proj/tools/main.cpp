#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "survint/config.hpp"
#include "survint/design.hpp"
#include "survint/error.hpp"
#include "survint/report.hpp"
#include "survint/simulation.hpp"

namespace {

using survint::ConfigError;
using nlohmann::json;

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::vector<std::string> overrides;
    std::string scale = "desk";
    bool seed_set = false;
    std::uint64_t seed = 0;
};

void write_output(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::fwrite(content.data(), 1, content.size(), stdout);
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("io-failure", "cannot open '" + out_path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("io-failure", "write to '" + out_path + "' failed");
}

json load_config_or_empty(const CommonOptions& opts) {
    if (opts.config_path.empty()) return json::object();
    return survint::load_json_file(opts.config_path);
}

void apply_common_overrides(json& doc, const CommonOptions& opts, bool population_document) {
    // --scale fills values the file leaves unset; --set and --seed override.
    const bool full = opts.scale == "full";
    if (population_document) {
        if (!doc.contains("n")) doc["n"] = full ? 900000 : 90000;
    } else {
        if (!doc.contains("replicates")) doc["replicates"] = full ? 2000 : 200;
        if (!doc.contains("population"))
            doc["population"] = {{"synthesize", json::object()}};
        if (doc["population"].contains("synthesize") &&
            !doc["population"]["synthesize"].contains("n"))
            doc["population"]["synthesize"]["n"] = full ? 900000 : 90000;
    }
    for (const std::string& assignment : opts.overrides) survint::apply_override(doc, assignment);
    if (opts.seed_set) {
        if (population_document) {
            doc["seed"] = opts.seed;
        } else {
            doc["seed"] = opts.seed;
            if (doc["population"].contains("synthesize"))
                doc["population"]["synthesize"]["seed"] = opts.seed;
        }
    }
}

int run_synth_pop(const CommonOptions& opts) {
    json doc = load_config_or_empty(opts);
    apply_common_overrides(doc, opts, true);
    survint::PopulationConfig cfg = survint::population_config_from_json(doc);
    survint::PopulationFrame frame = survint::synthesize_population(cfg);
    survint::save_population(frame, opts.out_path);
    std::fprintf(stderr, "wrote %zu units to %s (seed %llu)\n", frame.size(),
                 opts.out_path.c_str(), static_cast<unsigned long long>(cfg.seed));
    return 0;
}

std::string render_allocation_csv(const survint::PopulationFrame& frame,
                                  const survint::ScenarioFile& file) {
    using namespace survint;
    std::string out = "design,state,industry_division,size_band,N_h,S_h,Y_h,n_h\n";
    auto append = [&](DesignKind kind, const StratifiedFrame& s, const Allocation& a) {
        for (std::size_t h = 0; h < s.strata.size(); ++h) {
            const Stratum& st = s.strata[h];
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s,%s,%c,%s,%llu,%.6f,%.6f,%llu\n",
                          design_name(kind).c_str(),
                          std::string(kStateLabels[st.key.state]).c_str(),
                          industry_letter(st.key.industry),
                          std::string(kSizeBandLabels[st.key.band]).c_str(),
                          static_cast<unsigned long long>(st.count), st.sd_earnings,
                          st.total_earnings, static_cast<unsigned long long>(a.n_h[h]));
            out += buf;
        }
        std::fprintf(stderr, "%s: %zu strata, total n = %llu\n", design_name(kind).c_str(),
                     s.strata.size(), static_cast<unsigned long long>(a.total()));
    };
    BethelOptions bethel;
    bethel.min_stratum_n = file.scenario.min_stratum_n;
    for (DesignKind kind : file.scenario.designs) {
        std::optional<BigDataset> big;
        if (kind == DesignKind::dual_screening) {
            auto pi = selection_probabilities(frame, file.scenario.selection_model());
            Rng rng(derive_seed(file.scenario.seed, Stream::big_data, 0));
            big = draw_big_dataset(frame, pi, file.scenario.read_starred(), rng);
        }
        DesignFrames frames = build_design_frame(frame, big ? &*big : nullptr, kind);
        if (frames.sampling.empty()) continue;
        StratifiedFrame s = stratify(frame, frames.sampling);
        Allocation a = bethel_chromy_allocate(s, file.scenario.constraints, bethel);
        append(kind, s, a);
    }
    return out;
}

int run_allocate(const CommonOptions& opts) {
    json doc = load_config_or_empty(opts);
    apply_common_overrides(doc, opts, false);
    survint::ScenarioFile file = survint::scenario_file_from_json(doc);
    survint::PopulationFrame frame = survint::realize_population(file.population);
    write_output(opts.out_path, render_allocation_csv(frame, file));
    return 0;
}

int run_simulate(const CommonOptions& opts, std::uint32_t threads, const std::string& format) {
    json doc = load_config_or_empty(opts);
    apply_common_overrides(doc, opts, false);
    survint::ScenarioFile file = survint::scenario_file_from_json(doc);
    survint::PopulationFrame frame = survint::realize_population(file.population);
    survint::ScenarioResult result = survint::run_scenario(file.scenario, frame, threads);
    std::string rendered = format == "markdown" ? survint::render_markdown(result)
                                                : survint::render_results_csv(result);
    write_output(opts.out_path, rendered);
    std::fprintf(stderr, "scenario %s: %u replicates\n", result.scenario_id.c_str(),
                 result.replicates);
    for (const auto& [design, n] : result.mean_sample_size)
        std::fprintf(stderr, "  mean n (%s) = %.1f\n", survint::design_name(design).c_str(), n);
    return 0;
}

int run_report(const std::string& in_path, const std::string& out_path,
               const std::string& format) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw ConfigError("io-failure", "cannot open results file '" + in_path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<survint::ResultRow> rows = survint::parse_results_csv(text);
    std::string rendered;
    if (format == "markdown") {
        rendered = survint::render_markdown(rows);
    } else {
        rendered = text;  // normalized pass-through
    }
    write_output(out_path, rendered);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"survint: survey estimation with non-probability data at desk or full scale"};
    app.name("survint");
    app.require_subcommand(1);

    CommonOptions synth_opts, alloc_opts, sim_opts;
    std::string report_in, report_out;
    std::string sim_format = "csv", report_format = "markdown";
    std::uint32_t threads = 0;

    auto add_common = [](CLI::App* cmd, CommonOptions& opts, bool config_required) {
        auto* config = cmd->add_option("--config", opts.config_path,
                                       "JSON configuration file");
        if (config_required) config->required();
        cmd->add_option("--set", opts.overrides,
                        "override a config value, e.g. --set replicates=500");
        cmd->add_option("--scale", opts.scale, "desk (N=90k, R=200) or full (N=900k, R=2000)")
            ->check(CLI::IsMember({"desk", "full"}))
            ->capture_default_str();
        cmd->add_option("--seed", opts.seed, "override the configured master seed")
            ->trigger_on_parse()
            ->each([&opts](const std::string&) { opts.seed_set = true; });
    };

    CLI::App* synth = app.add_subcommand("synth-pop", "synthesize a population CSV");
    add_common(synth, synth_opts, false);
    synth->add_option("--out", synth_opts.out_path, "output population CSV")->required();

    CLI::App* alloc = app.add_subcommand("allocate", "stratify and allocate the configured designs");
    add_common(alloc, alloc_opts, true);
    alloc->add_option("--out", alloc_opts.out_path, "per-stratum allocation CSV (default stdout)");

    CLI::App* sim = app.add_subcommand("simulate", "run a scenario and write RB/RRMSE results");
    add_common(sim, sim_opts, true);
    sim->add_option("--out", sim_opts.out_path, "results file (default stdout)");
    sim->add_option("--threads", threads, "replicate worker threads (0 = hardware)");
    sim->add_option("--format", sim_format, "csv or markdown")
        ->check(CLI::IsMember({"csv", "markdown"}))
        ->capture_default_str();

    CLI::App* rep = app.add_subcommand("report", "render result tables from a results CSV");
    rep->add_option("--in", report_in, "results CSV produced by simulate")->required();
    rep->add_option("--out", report_out, "output file (default stdout)");
    rep->add_option("--format", report_format, "markdown or csv")
        ->check(CLI::IsMember({"markdown", "csv"}))
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) return run_synth_pop(synth_opts);
        if (alloc->parsed()) return run_allocate(alloc_opts);
        if (sim->parsed()) return run_simulate(sim_opts, threads, sim_format);
        if (rep->parsed()) return run_report(report_in, report_out, report_format);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
