#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "spherecal/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
    const char* p = std::getenv("SPHERECAL_CLI");
    REQUIRE_MESSAGE(p != nullptr, "SPHERECAL_CLI must point at the CLI binary");
    return p;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run(const std::string& args, const fs::path& dir) {
    fs::create_directories(dir);
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd =
        cli_path() + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(status);
    r.out = spherecal::read_file(out);
    r.err = spherecal::read_file(err);
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "spherecal_cli_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("calibrate: report, reliability table, svg, manifest") {
    const fs::path dir = scratch("calibrate");
    const fs::path log = dir / "log.csv";
    std::string csv = "true_class,p_0,p_1\n";
    for (int i = 0; i < 4; ++i) csv += std::string(i < 3 ? "0" : "1") + ",0.9,0.1\n";
    for (int i = 0; i < 6; ++i)
        csv += std::string(i < 4 ? "0" : "1") + "," +
               spherecal::format_shortest(2.0 / 3.0) + "," +
               spherecal::format_shortest(1.0 / 3.0) + "\n";
    spherecal::write_file(log, csv);

    const RunResult r =
        run("calibrate " + log.string() + " --bins 4 --out " + (dir / "out").string(), dir);
    CHECK(r.exit_code == 0);
    const json rep = json::parse(spherecal::read_file(dir / "out" / "calibration_report.json"));
    CHECK(std::abs(rep.at("ece").get<double>() - 0.06) < 1e-12);
    CHECK(fs::exists(dir / "out" / "reliability.csv"));
    const std::string svg = spherecal::read_file(dir / "out" / "reliability.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    const json manifest = json::parse(spherecal::read_file(dir / "out" / "manifest.json"));
    CHECK(manifest.at("command") == "calibrate");
    CHECK(manifest.at("tool_version") == "0.1.0");
}

TEST_CASE("calibrate: human output prints percentages") {
    const fs::path dir = scratch("calibrate_human");
    const fs::path log = dir / "log.csv";
    spherecal::write_file(log, "true_class,p_0,p_1\n0,1,0\n0,1,0\n");
    const RunResult r = run("calibrate " + log.string() + " --format csv --out " +
                                (dir / "out").string(),
                            dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("ECE 0.00%") != std::string::npos);
}

TEST_CASE("calibrate: ragged row fails with exit 2 and the line number") {
    const fs::path dir = scratch("calibrate_bad");
    const fs::path log = dir / "log.csv";
    spherecal::write_file(log, "true_class,p_0,p_1\n0,0.5,0.5\n0,0.5\n");
    const RunResult r = run("calibrate " + log.string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("calibrate: missing file exits 2") {
    const fs::path dir = scratch("calibrate_missing");
    CHECK(run("calibrate /nonexistent/log.csv", dir).exit_code == 2);
}

TEST_CASE("gradcheck: tiny run passes, impossible threshold fails with exit 1") {
    const fs::path dir = scratch("gradcheck");
    spherecal::write_file(dir / "ok.json",
                          R"({"seeds": 2, "n_values": [3, 5], "d_values": [2, 4],
                              "law_pairs": 50})");
    const RunResult ok = run("gradcheck --config " + (dir / "ok.json").string() + " --out " +
                                 (dir / "out").string(),
                             dir);
    CHECK(ok.exit_code == 0);
    const std::string curve = spherecal::read_file(dir / "out" / "gradnorm_curve.csv");
    CHECK(curve.rfind("theta_radians,cosine_gradnorm,angular_gradnorm\n", 0) == 0);

    spherecal::write_file(dir / "strict.json",
                          R"({"seeds": 1, "n_values": [3], "d_values": [2],
                              "threshold": 1e-12, "abs_floor": 1e-16, "law_pairs": 10})");
    const RunResult strict = run("gradcheck --config " + (dir / "strict.json").string() +
                                     " --out " + (dir / "out2").string(),
                                 dir);
    CHECK(strict.exit_code == 1);

    CHECK(run("gradcheck --config /nonexistent.json", dir).exit_code == 2);
}

TEST_CASE("tammes: tetrahedron passes, unknown case is unverified, n=1 exits 2") {
    const fs::path dir = scratch("tammes");
    const RunResult tetra = run("tammes --n 4 --d 3 --steps 4000 --restarts 3 --out " +
                                    (dir / "tetra").string(),
                                dir);
    CHECK(tetra.exit_code == 0);
    const json res = json::parse(spherecal::read_file(dir / "tetra" / "tammes_result.json"));
    CHECK(res.at("status") == "PASS");
    CHECK(std::abs(res.at("achieved_min_angle_degrees").get<double>() - 109.4712) < 1.0);
    CHECK(fs::exists(dir / "tetra" / "tammes_points.csv"));
    CHECK(fs::exists(dir / "tetra" / "tammes_runs.csv"));

    const RunResult unknown = run("tammes --n 7 --d 5 --steps 300 --restarts 2 --out " +
                                      (dir / "u").string(),
                                  dir);
    CHECK(unknown.exit_code == 0);
    const json ures = json::parse(spherecal::read_file(dir / "u" / "tammes_result.json"));
    CHECK(ures.at("status") == "UNVERIFIED");

    CHECK(run("tammes --n 1 --d 3", dir).exit_code == 2);
}

TEST_CASE("simulate: pareto table shape and the mode dispatch") {
    const fs::path dir = scratch("simulate");
    spherecal::write_file(dir / "cfg.json",
                          R"({"mode": "pareto", "n_classes": 5, "dim": 6, "n_samples": 8,
                              "noise_sigma": 0.25, "lambdas": [0, 10, 80]})");
    const RunResult r = run("simulate --config " + (dir / "cfg.json").string() + " --out " +
                                (dir / "out").string(),
                            dir);
    CHECK(r.exit_code == 0);
    const std::string csv = spherecal::read_file(dir / "out" / "pareto_table.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
    CHECK(csv.rfind("lambda,accuracy,ece,mean_min_angle\n", 0) == 0);

    spherecal::write_file(dir / "regime.json",
                          R"({"mode": "regime", "n_samples": 6, "noise_sigma": 0.25,
                              "regimes": [[10, 6], [3, 6]]})");
    const RunResult r2 = run("simulate --config " + (dir / "regime.json").string() + " --out " +
                                 (dir / "out2").string(),
                             dir);
    CHECK(r2.exit_code == 0);
    const std::string table = spherecal::read_file(dir / "out2" / "regime_table.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 9);  // header + 2x4 rows

    CHECK(run("simulate --config /nonexistent.json", dir).exit_code == 2);
    spherecal::write_file(dir / "badmode.json", R"({"mode": "bogus"})");
    CHECK(run("simulate --config " + (dir / "badmode.json").string(), dir).exit_code == 2);
}

TEST_CASE("simulate: identical configs give byte-identical outputs") {
    const fs::path dir = scratch("simulate_det");
    spherecal::write_file(dir / "cfg.json",
                          R"({"mode": "episode", "n_classes": 6, "dim": 8, "n_samples": 12,
                              "noise_sigma": 0.25, "master_seed": 3})");
    for (const char* sub : {"a", "b"}) {
        const RunResult r = run("simulate --config " + (dir / "cfg.json").string() + " --out " +
                                    (dir / sub).string(),
                                dir / ("run_" + std::string(sub)));
        CHECK(r.exit_code == 0);
    }
    for (const char* name :
         {"sim_result.json", "prediction_log.csv", "first_sample_trace.csv", "manifest.json"}) {
        CHECK(spherecal::read_file(dir / "a" / name) == spherecal::read_file(dir / "b" / name));
    }
}

TEST_CASE("usage errors exit with 2") {
    const fs::path dir = scratch("usage");
    CHECK(run("unknown-subcommand", dir).exit_code == 2);
    CHECK(run("", dir).exit_code == 2);
}
