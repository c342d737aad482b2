#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "spherecal/calibration.hpp"
#include "spherecal/cli.hpp"
#include "spherecal/core.hpp"
#include "spherecal/gradcheck.hpp"
#include "spherecal/objectives.hpp"
#include "spherecal/optimizer.hpp"
#include "spherecal/simulator.hpp"
#include "spherecal/tammes_oracle.hpp"

namespace py = pybind11;
using namespace spherecal;

namespace {

using DenseArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DenseArray& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Matrix m(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)));
    std::memcpy(m.data(), arr.data(), sizeof(double) * m.size());
    return m;
}

std::vector<double> to_vector(const DenseArray& arr) {
    if (arr.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
    return {arr.data(), arr.data() + arr.shape(0)};
}

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> arr({m.rows(), m.cols()});
    std::memcpy(arr.mutable_data(), m.data(), sizeof(double) * m.size());
    return arr;
}

py::tuple eval_to_tuple(const ObjectiveEval& e) {
    return py::make_tuple(e.value, to_array(e.grad));
}

std::vector<PredictionRecord> records_from_arrays(const DenseArray& probs,
                                                  const std::vector<std::size_t>& labels) {
    const Matrix p = to_matrix(probs);
    if (p.rows() != labels.size())
        throw std::invalid_argument("labels length must match probability rows");
    std::vector<PredictionRecord> records;
    records.reserve(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) {
        std::vector<double> row(p.row(i).begin(), p.row(i).end());
        records.push_back(PredictionRecord::from_probabilities(std::move(row), labels[i]));
    }
    return records;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hyperspherical dispersion objectives, sphere-constrained optimization, "
              "Tammes references, and confidence-calibration metrics.";
    m.attr("__version__") = kToolVersion;

    m.def("normalize", [](const DenseArray& features) {
        return to_array(normalize(FeatureMatrix(to_matrix(features))).data());
    }, py::arg("features"), "Row-wise L2 normalization.");

    m.def("cosine_matrix", [](const DenseArray& features) {
        return to_array(cosine_matrix(normalize(FeatureMatrix(to_matrix(features)))).data());
    }, py::arg("features"), "Clamped pairwise cosine matrix of the normalized rows.");

    m.def("angle_matrix", [](const DenseArray& features) {
        return to_array(
            angle_matrix(cosine_matrix(normalize(FeatureMatrix(to_matrix(features))))).data());
    }, py::arg("features"), "Pairwise angle matrix in radians.");

    m.def("min_pairwise_angle", [](const DenseArray& features) {
        return min_pairwise_angle(FeatureMatrix(to_matrix(features)));
    }, py::arg("features"));

    m.def("angular_diversity", [](const DenseArray& features, bool smooth_min, double beta) {
        AngularDiversityOptions opts;
        opts.smooth_min = smooth_min;
        opts.beta = beta;
        return eval_to_tuple(angular_diversity(FeatureMatrix(to_matrix(features)), opts));
    }, py::arg("features"), py::arg("smooth_min") = false, py::arg("beta") = 50.0,
       "Negated mean minimum pairwise angle; returns (value, grad).");

    m.def("orthogonality_loss", [](const DenseArray& features) {
        return eval_to_tuple(orthogonality_loss(FeatureMatrix(to_matrix(features))));
    }, py::arg("features"), "Mean squared off-diagonal cosine; returns (value, grad).");

    m.def("atfd_loss", [](const DenseArray& features) {
        return eval_to_tuple(atfd_loss(FeatureMatrix(to_matrix(features))));
    }, py::arg("features"), "Negated mean centroid distance; returns (value, grad).");

    m.def("tpt_loss", [](const DenseArray& probabilities, const std::string& mode) {
        const TptEval e = tpt_loss(to_matrix(probabilities), tpt_mode_from_string(mode));
        return py::make_tuple(e.value, to_array(e.grad_logits));
    }, py::arg("probabilities"), py::arg("mode") = "max_log_prob",
       "Confidence loss; returns (value, grad_wrt_logits).");

    m.def("finite_diff_gradient", [](const std::string& objective, const DenseArray& features,
                                     double step) {
        return to_array(finite_diff_gradient(objective_from_string(objective),
                                             FeatureMatrix(to_matrix(features)), step));
    }, py::arg("objective"), py::arg("features"), py::arg("step") = 1e-5,
       "Central-difference gradient oracle.");

    m.def("verify_cosine_gradnorm_law", [](const DenseArray& e_i, const DenseArray& e_j) {
        const auto r = verify_cosine_gradnorm_law(to_vector(e_i), to_vector(e_j));
        return py::make_tuple(r.measured, r.predicted);
    }, py::arg("e_i"), py::arg("e_j"));

    m.def("verify_angular_gradnorm_law", [](const DenseArray& e_i, const DenseArray& e_j) {
        const auto r = verify_angular_gradnorm_law(to_vector(e_i), to_vector(e_j));
        return py::make_tuple(r.measured, r.predicted);
    }, py::arg("e_i"), py::arg("e_j"));

    m.def("gradnorm_curve", [](const std::vector<double>& angles) {
        const auto rows = gradnorm_curve(angles);
        py::array_t<double> out({rows.size(), static_cast<std::size_t>(3)});
        auto* p = out.mutable_data();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            p[3 * i] = rows[i].theta;
            p[3 * i + 1] = rows[i].cosine_gradnorm;
            p[3 * i + 2] = rows[i].angular_gradnorm;
        }
        return out;
    }, py::arg("angles_radians"), "Rows of (theta, cosine_gradnorm, angular_gradnorm).");

    m.def("tune_features", [](const DenseArray& features, const DenseArray& image,
                              double temperature, double lam, const std::string& regularizer,
                              int steps, double learning_rate, bool renormalize) {
        CombinedLossConfig loss_cfg;
        loss_cfg.lambda = lam;
        loss_cfg.temperature = temperature;
        loss_cfg.regularizer = regularizer_from_string(regularizer);
        OptimizerConfig opt;
        opt.steps = steps;
        opt.learning_rate = learning_rate;
        opt.renormalize_each_step = renormalize;
        const SoftmaxHead head(to_vector(image), temperature);
        const TuneResult r =
            tune_features(FeatureMatrix(to_matrix(features)), head, opt, loss_cfg);
        py::list trace;
        for (const auto& rec : r.trace)
            trace.append(py::make_tuple(rec.step, rec.total_loss, rec.tpt_term, rec.reg_term));
        return py::make_tuple(to_array(r.features.data()), trace);
    }, py::arg("features"), py::arg("image"), py::arg("temperature") = 0.01,
       py::arg("lam") = 80.0, py::arg("regularizer") = "angular_diversity",
       py::arg("steps") = 1, py::arg("learning_rate") = 5e-3, py::arg("renormalize") = true,
       "Test-time tuning of the feature rows against one image; returns (features, trace).");

    m.def("solve_tammes", [](std::size_t n, std::size_t d, int restarts, int steps,
                             double learning_rate, std::uint64_t seed) {
        TammesSolveConfig cfg;
        cfg.restarts = restarts;
        cfg.steps = steps;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        const TammesResult r = solve_tammes(n, d, cfg);
        std::vector<double> run_angles;
        for (const auto& run : r.runs) run_angles.push_back(run.min_angle);
        return py::make_tuple(to_array(r.features.data()), r.min_angle, run_angles);
    }, py::arg("n"), py::arg("d"), py::arg("restarts") = 10, py::arg("steps") = 2000,
       py::arg("learning_rate") = 1e-2, py::arg("seed") = 0,
       "Best-packing search; returns (points, min_angle, per_restart_angles).");

    m.def("tammes_reference", [](std::size_t n, std::size_t d) -> py::object {
        const auto c = find_case(n, d);
        if (!c) return py::none();
        return py::float_(c->optimal_min_angle);
    }, py::arg("n"), py::arg("d"), "Known optimal minimum angle, or None.");

    m.def("compute_ece", [](const DenseArray& probabilities,
                            const std::vector<std::size_t>& labels, int n_bins) {
        const auto report = compute_ece(records_from_arrays(probabilities, labels), n_bins);
        return py::module_::import("json").attr("loads")(report_to_json(report).dump());
    }, py::arg("probabilities"), py::arg("labels"), py::arg("n_bins") = 15,
       "Full calibration report as a dict.");

    m.def("compute_sce", [](const DenseArray& probabilities,
                            const std::vector<std::size_t>& labels, int n_bins) {
        return compute_sce(records_from_arrays(probabilities, labels), n_bins);
    }, py::arg("probabilities"), py::arg("labels"), py::arg("n_bins") = 15);

    m.def("weighted_average", [](const std::vector<std::pair<std::size_t, double>>& per_dataset) {
        return weighted_average(per_dataset);
    }, py::arg("per_dataset"), "Test-set-size weighted mean of a metric.");

    m.def("run_episode_json", [](const std::string& config_json) {
        const SimConfig cfg = sim_config_from_json(nlohmann::json::parse(config_json));
        const World world = generate_world(cfg);
        return sim_result_to_json(run_episode(world, cfg)).dump();
    }, py::arg("config_json"), "Synthetic zero-shot episode; JSON config in, JSON result out.");

    m.def("regime_experiment_json", [](const std::string& config_json,
                                       const std::vector<std::pair<std::size_t, std::size_t>>&
                                           regimes) {
        const SimConfig cfg = sim_config_from_json(nlohmann::json::parse(config_json));
        const auto rows = regime_experiment(regimes, cfg);
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : rows)
            out.push_back({{"n_classes", r.n_classes},
                           {"dim", r.dim},
                           {"regularizer", to_string(r.regularizer)},
                           {"ece", r.ece},
                           {"mean_min_angle", r.mean_min_angle},
                           {"cos_mean", r.cos_mean},
                           {"cos_std", r.cos_std}});
        return out.dump();
    }, py::arg("config_json"), py::arg("regimes"));

    m.def("pareto_sweep_json", [](const std::string& config_json,
                                  const std::vector<double>& lambdas) {
        const SimConfig cfg = sim_config_from_json(nlohmann::json::parse(config_json));
        const World world = generate_world(cfg);
        const auto rows = pareto_sweep(lambdas, world, cfg);
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : rows)
            out.push_back({{"lambda", r.lambda},
                           {"accuracy", r.accuracy},
                           {"ece", r.ece},
                           {"mean_min_angle", r.mean_min_angle}});
        return out.dump();
    }, py::arg("config_json"), py::arg("lambdas"));
}
