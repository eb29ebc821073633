#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "survint/config.hpp"
#include "survint/design.hpp"
#include "survint/error.hpp"
#include "survint/estimators.hpp"
#include "survint/moments.hpp"
#include "survint/population.hpp"
#include "survint/report.hpp"
#include "survint/simulation.hpp"
#include "survint/weighting.hpp"

namespace py = pybind11;
using namespace survint;

namespace {

Eigen::VectorXd to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw ConfigError("invalid-argument", "expected a 1-d array");
    Eigen::VectorXd v(a.shape(0));
    std::copy(a.data(), a.data() + a.shape(0), v.data());
    return v;
}

Eigen::MatrixXd to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ConfigError("invalid-argument", "expected a 2-d array");
    Eigen::MatrixXd m(a.shape(0), a.shape(1));
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = a.at(i, j);
    return m;
}

py::array_t<double> from_vector(const Eigen::VectorXd& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.data(), v.data() + v.size(), out.mutable_data());
    return out;
}

nlohmann::json parse_config(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config-invalid", std::string(what) + " is not valid JSON: " + e.what());
    }
}

py::dict scenario_result_to_dict(const ScenarioResult& result) {
    py::dict out;
    out["scenario"] = result.scenario_id;
    out["replicates"] = result.replicates;
    out["results_csv"] = render_results_csv(result);
    py::list rows;
    for (const EstimatorSummary& est : result.estimators) {
        for (int v = 0; v < 4; ++v) {
            const CellStats& cell = est.by_variable[static_cast<std::size_t>(v)];
            py::dict row;
            row["estimator"] = est.id;
            row["variable"] = v < 3 ? kVariableNames[static_cast<std::size_t>(v)] : "awe";
            row["rb"] = cell.rb;
            row["rrmse"] = cell.rrmse;
            row["n_replicates"] = cell.n_used;
            row["n_failures"] = cell.n_failures;
            rows.append(row);
        }
    }
    out["rows"] = rows;
    py::dict sizes;
    for (const auto& [design, n] : result.mean_sample_size)
        sizes[py::str(design_name(design))] = n;
    out["mean_sample_size"] = sizes;
    py::dict truth;
    truth["earn"] = result.truth.earn;
    truth["emp"] = result.truth.emp;
    truth["ovt"] = result.truth.ovt;
    truth["awe"] = result.truth_awe;
    out["truth"] = truth;
    return out;
}

class PyFrame {
public:
    explicit PyFrame(PopulationFrame frame) : frame_(std::move(frame)) {}

    std::size_t size() const { return frame_.size(); }

    py::array_t<double> column(const std::string& name) const {
        py::array_t<double> out(static_cast<py::ssize_t>(frame_.size()));
        double* data = out.mutable_data();
        for (std::size_t i = 0; i < frame_.size(); ++i) {
            const UnitRecord& u = frame_.units[i];
            double v = 0.0;
            if (name == "unit_id") v = static_cast<double>(u.unit_id);
            else if (name == "state") v = u.state;
            else if (name == "industry") v = u.industry;
            else if (name == "size_group") v = u.size_group;
            else if (name == "frame_employment") v = static_cast<double>(u.frame_employment);
            else if (name == "reported_employment") v = static_cast<double>(u.reported_employment);
            else if (name == "earnings") v = u.earnings;
            else if (name == "overtime") v = u.overtime;
            else if (name == "earnings_star") v = u.earnings_star;
            else if (name == "emp_star") v = u.emp_star;
            else if (name == "ovt_star") v = u.ovt_star;
            else throw ConfigError("invalid-argument", "unknown column '" + name + "'");
            data[i] = v;
        }
        return out;
    }

    void save(const std::string& path) const { save_population(frame_, path); }

    const PopulationFrame& frame() const { return frame_; }

private:
    PopulationFrame frame_;
};

}  // namespace

PYBIND11_MODULE(_survint, m) {
    m.doc() = "Survey estimation with large non-probability datasets";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    py::class_<PyFrame>(m, "Frame")
        .def("__len__", &PyFrame::size)
        .def("column", &PyFrame::column, py::arg("name"),
             "Column as a float array; categorical columns come back as codes.")
        .def("save", &PyFrame::save, py::arg("path"));

    m.def(
        "default_population_config",
        [](std::uint64_t n) { return population_config_to_json(default_population_config(n)).dump(2); },
        py::arg("n") = 900000, "Bundled population defaults as a JSON string.");

    m.def(
        "synthesize_population",
        [](const std::string& config_json) {
            PopulationConfig cfg =
                population_config_from_json(parse_config(config_json, "population config"));
            return PyFrame(synthesize_population(cfg));
        },
        py::arg("config_json"), "Build the synthetic business population.");

    m.def(
        "load_population", [](const std::string& path) { return PyFrame(load_population(path)); },
        py::arg("path"));

    m.def(
        "solve_fleishman",
        [](double mean, double variance, double skewness, double kurtosis) {
            FleishmanCoeffs c = solve_fleishman({mean, variance, skewness, kurtosis});
            return py::make_tuple(c.a, c.b, c.c, c.d);
        },
        py::arg("mean"), py::arg("variance"), py::arg("skewness"), py::arg("kurtosis"),
        "Power-method polynomial coefficients (a, b, c, d) for the standardized target.");

    m.def(
        "vale_maurelli_pair",
        [](py::tuple spec_x, py::tuple spec_y, double covariance, std::size_t n,
           std::uint64_t seed) {
            auto to_spec = [](py::tuple t) {
                if (t.size() != 4)
                    throw ConfigError("invalid-argument",
                                      "moment specs are (mean, variance, skewness, kurtosis)");
                return MomentSpec{t[0].cast<double>(), t[1].cast<double>(), t[2].cast<double>(),
                                  t[3].cast<double>()};
            };
            Rng rng(seed);
            auto [xs, ys] = vale_maurelli_pair(to_spec(spec_x), to_spec(spec_y), covariance, n, rng);
            return py::make_tuple(py::array_t<double>(py::ssize_t(xs.size()), xs.data()),
                                  py::array_t<double>(py::ssize_t(ys.size()), ys.data()));
        },
        py::arg("spec_x"), py::arg("spec_y"), py::arg("covariance"), py::arg("n"), py::arg("seed"),
        "Correlated non-normal pairs with the requested moments.");

    m.def(
        "chi_square_calibrate",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> d,
           py::array_t<double, py::array::c_style | py::array::forcecast> covariates,
           py::array_t<double, py::array::c_style | py::array::forcecast> benchmarks,
           py::object tuning) {
            CalibrationProblem problem;
            problem.initial_weights = to_vector(d);
            problem.covariates = to_matrix(covariates);
            problem.benchmarks = to_vector(benchmarks);
            if (!tuning.is_none())
                problem.tuning = to_vector(
                    tuning.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>());
            CalibrationResult res = chi_square_calibrate(problem);
            return py::make_tuple(from_vector(res.weights), res.negative_weight_count);
        },
        py::arg("initial_weights"), py::arg("covariates"), py::arg("benchmarks"),
        py::arg("tuning") = py::none(),
        "Chi-square-distance calibrated weights and the negative-weight count.");

    m.def(
        "fit_logistic_weighted",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> response,
           py::array_t<double, py::array::c_style | py::array::forcecast> design,
           py::array_t<double, py::array::c_style | py::array::forcecast> weights) {
            LogisticFit fit =
                fit_logistic_weighted(to_vector(response), to_matrix(design), to_vector(weights));
            return from_vector(fit.beta);
        },
        py::arg("response"), py::arg("design"), py::arg("case_weights"),
        "Design-weighted logistic coefficients.");

    m.def(
        "allocate",
        [](const std::string& scenario_json) {
            ScenarioFile file =
                scenario_file_from_json(parse_config(scenario_json, "scenario config"));
            PopulationFrame frame = realize_population(file.population);
            BethelOptions bethel;
            bethel.min_stratum_n = file.scenario.min_stratum_n;
            py::dict out;
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
                py::dict entry;
                entry["strata"] = s.strata.size();
                entry["total_n"] = a.total();
                out[py::str(design_name(kind))] = entry;
            }
            return out;
        },
        py::arg("scenario_json"), "Stratum counts and allocated totals per configured design.");

    m.def(
        "run_scenario",
        [](const std::string& scenario_json, std::uint32_t threads) {
            ScenarioFile file =
                scenario_file_from_json(parse_config(scenario_json, "scenario config"));
            PopulationFrame frame = realize_population(file.population);
            ScenarioResult result = run_scenario(file.scenario, frame, threads);
            return scenario_result_to_dict(result);
        },
        py::arg("scenario_json"), py::arg("threads") = 0,
        "Run a full scenario; returns RB/RRMSE rows and the results CSV.");

    m.def(
        "run_scenario_on_frame",
        [](const std::string& scenario_json, const PyFrame& frame, std::uint32_t threads) {
            ScenarioFile file =
                scenario_file_from_json(parse_config(scenario_json, "scenario config"));
            ScenarioResult result = run_scenario(file.scenario, frame.frame(), threads);
            return scenario_result_to_dict(result);
        },
        py::arg("scenario_json"), py::arg("frame"), py::arg("threads") = 0,
        "Run a scenario against an already-built population frame.");

    m.def(
        "render_markdown",
        [](const std::string& results_csv) { return render_markdown(parse_results_csv(results_csv)); },
        py::arg("results_csv"), "Paper-style markdown tables from a results CSV.");
}
