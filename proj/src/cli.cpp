#include "spherecal/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "spherecal/gradcheck.hpp"
#include "spherecal/io.hpp"
#include "spherecal/optimizer.hpp"
#include "spherecal/simulator.hpp"
#include "spherecal/tammes_oracle.hpp"

namespace spherecal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const double kPi = std::acos(-1.0);
const double kDeg = 180.0 / std::acos(-1.0);

void ensure_dir(const fs::path& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::string hash_bytes(const std::string& bytes) { return hex64(fnv1a64(bytes)); }

struct CommonFlags {
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int bins = 15;
    bool bins_set = false;
    std::string format = "json";
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "seed override")
        ->each([&](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--bins", flags.bins, "number of calibration bins")
        ->check(CLI::PositiveNumber)
        ->each([&](const std::string&) { flags.bins_set = true; });
    cmd->add_option("--format", flags.format, "stdout format")
        ->check(CLI::IsMember({"json", "csv"}));
}

int cmd_gradcheck(const std::string& config_path, const CommonFlags& flags) {
    GradCheckSuiteConfig suite_cfg;
    int law_pairs = 1000;
    double law_rel_tol = 1e-6;
    double law_std_tol = 1e-6;
    double cos_rel_tol = 1e-8;
    std::vector<double> curve_deg = {5, 30, 60, 90, 150};

    std::string config_bytes = "{}";
    if (!config_path.empty()) {
        json j;
        try {
            config_bytes = read_file(config_path);
            j = json::parse(config_bytes);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return kExitUsage;
        }
        suite_cfg.seeds = j.value("seeds", suite_cfg.seeds);
        suite_cfg.step = j.value("step", suite_cfg.step);
        suite_cfg.threshold = j.value("threshold", suite_cfg.threshold);
        suite_cfg.abs_floor = j.value("abs_floor", suite_cfg.abs_floor);
        if (j.contains("n_values")) suite_cfg.n_values = j.at("n_values").get<std::vector<std::size_t>>();
        if (j.contains("d_values")) suite_cfg.d_values = j.at("d_values").get<std::vector<std::size_t>>();
        law_pairs = j.value("law_pairs", law_pairs);
        if (j.contains("curve_angles_deg")) curve_deg = j.at("curve_angles_deg").get<std::vector<double>>();
    }
    if (flags.seed_set) suite_cfg.base_seed = flags.seed;

    const GradCheckSuiteResult suite = run_gradcheck_suite(suite_cfg);

    // Gradient-norm laws over random unit pairs outside the clamp band.
    double ang_max_rel = 0.0, cos_max_rel = 0.0;
    double mean = 0.0, m2 = 0.0;
    int used = 0;
    for (int i = 0; used < law_pairs && i < 10 * law_pairs; ++i) {
        const Matrix pair = random_matrix(2, 8, suite_cfg.base_seed + 7777 + i);
        std::vector<double> a(pair.row(0).begin(), pair.row(0).end());
        std::vector<double> b(pair.row(1).begin(), pair.row(1).end());
        const double na = norm2(a);
        for (auto& x : a) x /= na;  // fixed ||e_i|| = 1 for the std gate
        GradNormLawResult ang;
        try {
            ang = verify_angular_gradnorm_law(a, b);
        } catch (const ClampBand&) {
            continue;
        }
        const GradNormLawResult cos = verify_cosine_gradnorm_law(a, b);
        ang_max_rel = std::max(ang_max_rel,
                               std::abs(ang.measured - ang.predicted) / ang.predicted);
        cos_max_rel = std::max(cos_max_rel, std::abs(cos.measured - cos.predicted) /
                                                (1.0 + cos.predicted));
        ++used;
        const double delta = ang.measured - mean;
        mean += delta / used;
        m2 += delta * (ang.measured - mean);
    }
    const double ang_std = std::sqrt(m2 / std::max(1, used - 1));

    std::vector<double> curve_rad;
    for (double d : curve_deg) curve_rad.push_back(d * kPi / 180.0);
    const auto curve = gradnorm_curve(curve_rad);

    const bool laws_pass = ang_max_rel <= law_rel_tol && ang_std <= law_std_tol &&
                           cos_max_rel <= cos_rel_tol;
    const bool all_pass = suite.passed && laws_pass;

    ensure_dir(flags.out_dir);
    json report = {
        {"suite",
         {{"passed", suite.passed},
          {"checked", suite.checked},
          {"skipped", suite.skipped},
          {"max_rel_error", suite.worst.max_rel_error},
          {"max_abs_error", suite.worst.max_abs_error},
          {"worst_entry", {suite.worst.worst_row, suite.worst.worst_col}},
          {"worst_objective", suite.worst_objective},
          {"threshold", suite_cfg.threshold}}},
        {"laws",
         {{"passed", laws_pass},
          {"pairs", used},
          {"angular_max_rel_error", ang_max_rel},
          {"angular_gradnorm_std", ang_std},
          {"cosine_max_rel_error", cos_max_rel}}},
        {"passed", all_pass}};
    write_file(fs::path(flags.out_dir) / "gradcheck_report.json", report.dump(2) + "\n");
    write_file(fs::path(flags.out_dir) / "gradnorm_curve.csv", gradnorm_curve_csv(curve));
    write_manifest({"gradcheck", hash_bytes(config_bytes), suite_cfg.base_seed, kToolVersion,
                    {"gradcheck_report.json", "gradnorm_curve.csv"}},
                   flags.out_dir);

    if (flags.format == "json") {
        std::printf("%s\n", report.dump(2).c_str());
    } else {
        std::printf("gate,passed\nfd_suite,%d\ngradnorm_laws,%d\n", suite.passed ? 1 : 0,
                    laws_pass ? 1 : 0);
    }
    return all_pass ? kExitOk : kExitGateFailure;
}

int cmd_tammes(int n, int d, int restarts, int steps, double lr, const CommonFlags& flags) {
    if (n < 2 || d < 2) {
        std::fprintf(stderr, "need --n >= 2 and --d >= 2\n");
        return kExitUsage;
    }
    TammesSolveConfig cfg;
    cfg.restarts = restarts;
    cfg.steps = steps;
    cfg.learning_rate = lr;
    cfg.seed = flags.seed;

    const json resolved = {{"n", n},         {"d", d},   {"restarts", restarts},
                           {"steps", steps}, {"lr", lr}, {"seed", flags.seed}};
    const TammesResult result = solve_tammes(static_cast<std::size_t>(n),
                                             static_cast<std::size_t>(d), cfg);
    const auto oracle = find_case(static_cast<std::size_t>(n), static_cast<std::size_t>(d));

    std::string status = "UNVERIFIED";
    if (oracle) {
        const double err_deg = std::abs(result.min_angle - oracle->optimal_min_angle) * kDeg;
        status = err_deg <= 1.0 ? "PASS" : "FAIL";
    }

    json out = {{"n", n},
                {"d", d},
                {"achieved_min_angle_radians", result.min_angle},
                {"achieved_min_angle_degrees", result.min_angle * kDeg},
                {"status", status},
                {"runs", json::array()}};
    if (oracle) {
        out["oracle_min_angle_radians"] = oracle->optimal_min_angle;
        out["oracle_min_angle_degrees"] = oracle->optimal_min_angle * kDeg;
    }
    std::string runs_csv = "restart,seed,min_angle_radians\n";
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& run = result.runs[i];
        out["runs"].push_back({{"seed", run.seed}, {"min_angle_radians", run.min_angle}});
        runs_csv += std::to_string(i) + ',' + std::to_string(run.seed) + ',' +
                    format_shortest(run.min_angle) + '\n';
    }

    ensure_dir(flags.out_dir);
    write_file(fs::path(flags.out_dir) / "tammes_result.json", out.dump(2) + "\n");
    write_file(fs::path(flags.out_dir) / "tammes_runs.csv", runs_csv);
    save_feature_csv(result.features, fs::path(flags.out_dir) / "tammes_points.csv");
    write_file(fs::path(flags.out_dir) / "tammes_cases.csv", tammes_cases_csv(analytic_cases()));
    write_manifest(
        {"tammes", hash_bytes(resolved.dump()), flags.seed, kToolVersion,
         {"tammes_result.json", "tammes_runs.csv", "tammes_points.csv", "tammes_cases.csv"}},
        flags.out_dir);

    if (flags.format == "json") {
        std::printf("%s\n", out.dump(2).c_str());
    } else {
        std::printf("n=%d d=%d achieved %.4f deg%s status %s\n", n, d, result.min_angle * kDeg,
                    oracle ? (" oracle " + format_fixed(oracle->optimal_min_angle * kDeg, 4) +
                              " deg")
                                 .c_str()
                           : "",
                    status.c_str());
    }
    return status == "FAIL" ? kExitGateFailure : kExitOk;
}

int cmd_calibrate(const std::string& log_path, const CommonFlags& flags) {
    std::string bytes;
    std::vector<PredictionRecord> records;
    try {
        bytes = read_file(log_path);
        records = parse_prediction_log(bytes);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "log error: %s\n", e.what());
        return kExitUsage;
    }
    const CalibrationReport report = compute_ece(records, flags.bins);
    const auto rows = reliability_data(report);

    ensure_dir(flags.out_dir);
    write_file(fs::path(flags.out_dir) / "calibration_report.json",
               report_to_json(report).dump(2) + "\n");
    write_file(fs::path(flags.out_dir) / "reliability.csv", reliability_csv(rows));
    write_file(fs::path(flags.out_dir) / "reliability.svg", reliability_svg(report));
    write_manifest({"calibrate", hash_bytes(bytes), flags.seed, kToolVersion,
                    {"calibration_report.json", "reliability.csv", "reliability.svg"}},
                   flags.out_dir);

    if (flags.format == "json") {
        std::printf("%s\n", report_to_json(report).dump(2).c_str());
    } else {
        std::printf("ECE %.2f%%  SCE %.2f%%  accuracy %.2f%%  (%zu records, %d bins)\n",
                    report.ece * 100.0, report.sce * 100.0, report.accuracy * 100.0,
                    records.size(), report.n_bins);
    }
    return kExitOk;
}

int cmd_simulate(const std::string& config_path, const CommonFlags& flags) {
    std::string bytes;
    json j;
    std::string mode;
    SimConfig cfg;
    std::vector<std::pair<std::size_t, std::size_t>> regimes = {{200, 64}, {10, 64}};
    std::vector<double> lambdas = {0.0, 1.0, 10.0, 80.0, 200.0};
    try {
        bytes = read_file(config_path);
        j = json::parse(bytes);
        mode = j.value("mode", "episode");
        if (mode != "episode" && mode != "regime" && mode != "pareto")
            throw Error("mode must be episode, regime, or pareto");
        cfg = sim_config_from_json(j);
        if (flags.seed_set) {
            cfg.master_seed = flags.seed;
            cfg.opt.seed = flags.seed;
        }
        if (flags.bins_set) cfg.n_bins = flags.bins;
        if (j.contains("regimes")) {
            regimes.clear();
            for (const auto& r : j.at("regimes"))
                regimes.emplace_back(r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>());
        }
        if (j.contains("lambdas")) lambdas = j.at("lambdas").get<std::vector<double>>();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    }

    ensure_dir(flags.out_dir);
    RunManifest manifest{"simulate", hash_bytes(bytes), cfg.master_seed, kToolVersion, {}};
    json summary;
    try {
        if (mode == "episode") {
            const World world = generate_world(cfg);
            const SimResult result = run_episode(world, cfg);
            summary = sim_result_to_json(result);
            write_file(fs::path(flags.out_dir) / "sim_result.json", summary.dump(2) + "\n");
            write_file(fs::path(flags.out_dir) / "prediction_log.csv",
                       prediction_log_csv(result.records));
            write_file(fs::path(flags.out_dir) / "first_sample_trace.csv",
                       loss_trace_csv(result.first_sample_trace));
            manifest.outputs = {"sim_result.json", "prediction_log.csv",
                                "first_sample_trace.csv"};
        } else if (mode == "regime") {
            const auto rows = regime_experiment(regimes, cfg);
            const std::string csv = regime_table_csv(rows);
            summary = json::array();
            for (const auto& r : rows)
                summary.push_back({{"n_classes", r.n_classes},
                                   {"dim", r.dim},
                                   {"regularizer", to_string(r.regularizer)},
                                   {"ece", r.ece},
                                   {"mean_min_angle", r.mean_min_angle},
                                   {"cos_mean", r.cos_mean},
                                   {"cos_std", r.cos_std}});
            write_file(fs::path(flags.out_dir) / "regime_table.csv", csv);
            write_file(fs::path(flags.out_dir) / "regime_result.json", summary.dump(2) + "\n");
            manifest.outputs = {"regime_table.csv", "regime_result.json"};
        } else {
            const World world = generate_world(cfg);
            const auto rows = pareto_sweep(lambdas, world, cfg);
            const std::string csv = pareto_table_csv(rows);
            summary = json::array();
            for (const auto& r : rows)
                summary.push_back({{"lambda", r.lambda},
                                   {"accuracy", r.accuracy},
                                   {"ece", r.ece},
                                   {"mean_min_angle", r.mean_min_angle}});
            write_file(fs::path(flags.out_dir) / "pareto_table.csv", csv);
            write_file(fs::path(flags.out_dir) / "pareto_result.json", summary.dump(2) + "\n");
            manifest.outputs = {"pareto_table.csv", "pareto_result.json"};
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kExitGateFailure;
    }
    write_manifest(manifest, flags.out_dir);

    if (flags.format == "json") {
        std::printf("%s\n", summary.dump(2).c_str());
    } else {
        std::printf("simulate mode=%s done; outputs in %s\n", mode.c_str(),
                    flags.out_dir.c_str());
    }
    return kExitOk;
}

}  // namespace

void write_manifest(const RunManifest& manifest, const fs::path& out_dir) {
    json j = {{"command", manifest.command},
              {"config_hash", manifest.config_hash},
              {"seed", manifest.seed},
              {"tool_version", manifest.tool_version},
              {"outputs", manifest.outputs}};
    write_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

int run_cli(int argc, char** argv) {
    CLI::App app{"hyperspherical dispersion objectives, sphere-constrained optimization, "
                 "Tammes references, and confidence-calibration metrics"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* gradcheck = app.add_subcommand("gradcheck", "verify analytic gradients and norm laws");
    std::string gradcheck_config;
    gradcheck->add_option("--config", gradcheck_config, "gradcheck config JSON");
    add_common(gradcheck, flags);

    auto* tammes = app.add_subcommand("tammes", "solve a best-packing instance");
    int tn = 0, td = 0, restarts = 10, steps = 20000;
    double lr = 1e-3;
    tammes->add_option("--n", tn, "number of points")->required();
    tammes->add_option("--d", td, "ambient dimension")->required();
    tammes->add_option("--restarts", restarts, "seeded restarts");
    tammes->add_option("--steps", steps, "optimization steps per restart");
    tammes->add_option("--lr", lr, "learning rate");
    add_common(tammes, flags);

    auto* calibrate = app.add_subcommand("calibrate", "calibration metrics for a prediction log");
    std::string log_path;
    calibrate->add_option("log", log_path, "prediction log CSV")->required();
    add_common(calibrate, flags);

    auto* simulate = app.add_subcommand("simulate", "synthetic zero-shot episodes");
    std::string sim_config;
    simulate->add_option("--config", sim_config, "simulation config JSON")->required();
    add_common(simulate, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_config, flags);
        if (tammes->parsed()) return cmd_tammes(tn, td, restarts, steps, lr, flags);
        if (calibrate->parsed()) return cmd_calibrate(log_path, flags);
        if (simulate->parsed()) return cmd_simulate(sim_config, flags);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitGateFailure;
    }
    return kExitUsage;
}

}  // namespace spherecal
