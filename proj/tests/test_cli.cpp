#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef SURVINT_CLI_PATH
#error "SURVINT_CLI_PATH must point at the survint binary"
#endif

namespace {

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

RunResult run_cli(const std::string& args) {
    const std::string out_path = "cli_stdout.tmp";
    const std::string err_path = "cli_stderr.tmp";
    const std::string command = std::string(SURVINT_CLI_PATH) + " " + args + " >" + out_path +
                                " 2>" + err_path;
    const int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WEXITSTATUS(status);
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return result;
}

const char* kSmallScenario = R"({
  "scenario": {"missingness": "SAR", "measurement_error": false},
  "designs": ["single", "dual_screening", "cutoff"],
  "estimators": ["greg", "sp", "co_bd"],
  "replicates": 3,
  "seed": 17,
  "population": {"synthesize": {"n": 6000, "seed": 4}}
})";

}  // namespace

TEST_CASE("help lists every subcommand and documented flag") {
    RunResult help = run_cli("--help");
    CHECK(help.exit_code == 0);
    const std::string golden = slurp(std::string(SURVINT_TEST_DATA) + "/cli_help.txt");
    REQUIRE(!golden.empty());
    CHECK(help.out == golden);

    RunResult sim_help = run_cli("simulate --help");
    for (const char* flag : {"--config", "--out", "--seed", "--threads", "--scale", "--format",
                             "--set"})
        CHECK(sim_help.out.find(flag) != std::string::npos);
}

TEST_CASE("simulate is deterministic across thread counts") {
    spit("scenario_det.json", kSmallScenario);
    RunResult a = run_cli("simulate --config scenario_det.json --out det1.csv --threads 1");
    RunResult b = run_cli("simulate --config scenario_det.json --out det2.csv --threads 4");
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp("det1.csv") == slurp("det2.csv"));
    CHECK(!slurp("det1.csv").empty());
    std::remove("scenario_det.json");
    std::remove("det1.csv");
    std::remove("det2.csv");
}

TEST_CASE("missing config files exit with code 1 and name the path") {
    RunResult r = run_cli("simulate --config does_not_exist.json --out x.csv");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("does_not_exist.json") != std::string::npos);
}

TEST_CASE("unknown config keys exit with code 1 and name the key") {
    spit("scenario_bad.json", R"({"estimatorz": ["greg"]})");
    RunResult r = run_cli("simulate --config scenario_bad.json --out x.csv");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("estimatorz") != std::string::npos);
    std::remove("scenario_bad.json");
}

TEST_CASE("synth-pop with the same seed writes identical files") {
    RunResult a = run_cli("synth-pop --out pop_a.csv --seed 7 --set n=3000");
    RunResult b = run_cli("synth-pop --out pop_b.csv --seed 7 --set n=3000");
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    const std::string pa = slurp("pop_a.csv");
    CHECK(pa == slurp("pop_b.csv"));
    CHECK(pa.rfind("unit_id,state,industry_division,size_group,frame_employment,", 0) == 0);

    RunResult c = run_cli("synth-pop --out pop_c.csv --seed 8 --set n=3000");
    REQUIRE(c.exit_code == 0);
    CHECK(pa != slurp("pop_c.csv"));
    std::remove("pop_a.csv");
    std::remove("pop_b.csv");
    std::remove("pop_c.csv");
}

TEST_CASE("allocate writes a per-stratum table") {
    spit("scenario_alloc.json", kSmallScenario);
    RunResult r = run_cli("allocate --config scenario_alloc.json --out alloc.csv");
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp("alloc.csv");
    CHECK(csv.rfind("design,state,industry_division,size_band,N_h,S_h,Y_h,n_h", 0) == 0);
    CHECK(csv.find("single,") != std::string::npos);
    CHECK(csv.find("dual_screening,") != std::string::npos);
    CHECK(r.err.find("total n") != std::string::npos);
    std::remove("scenario_alloc.json");
    std::remove("alloc.csv");
}

TEST_CASE("report renders markdown from a results csv") {
    spit("scenario_rep.json", kSmallScenario);
    RunResult sim = run_cli("simulate --config scenario_rep.json --out rep_results.csv");
    REQUIRE(sim.exit_code == 0);
    RunResult rep = run_cli("report --in rep_results.csv --out rep.md");
    REQUIRE(rep.exit_code == 0);
    const std::string md = slurp("rep.md");
    CHECK(md.find("## Scenario sar_no_me") != std::string::npos);
    CHECK(md.find("| greg |") != std::string::npos);
    std::remove("scenario_rep.json");
    std::remove("rep_results.csv");
    std::remove("rep.md");
}
