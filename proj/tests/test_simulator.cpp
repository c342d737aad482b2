#include <cmath>

#include "doctest.h"
#include "spherecal/simulator.hpp"

using namespace spherecal;

namespace {

SimConfig small_config() {
    SimConfig cfg;
    cfg.n_classes = 6;
    cfg.dim = 8;
    cfg.n_samples = 40;
    cfg.noise_sigma = 0.25;
    cfg.master_seed = 0;
    return cfg;
}

std::size_t nearest_prototype(const World& world, const TestSample& s) {
    std::size_t best = 0;
    double best_cos = -2.0;
    for (std::size_t i = 0; i < world.prototypes.n_classes(); ++i) {
        const double c = dot(world.prototypes.data().row(i), std::span<const double>(s.image));
        if (c > best_cos) {
            best_cos = c;
            best = i;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("a nearly noise-free world is recovered exactly by nearest prototype") {
    SimConfig cfg = small_config();
    cfg.noise_sigma = 1e-9;
    const World world = generate_world(cfg);
    REQUIRE(world.samples.size() == cfg.n_samples);
    for (const auto& s : world.samples) CHECK(nearest_prototype(world, s) == s.label);
}

TEST_CASE("world generation is seed-deterministic") {
    const SimConfig cfg = small_config();
    const World a = generate_world(cfg);
    const World b = generate_world(cfg);
    CHECK(a.prototypes.data() == b.prototypes.data());
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].label == b.samples[i].label);
        CHECK(a.samples[i].image == b.samples[i].image);
    }
    SimConfig other = cfg;
    other.master_seed = 1;
    CHECK(generate_world(other).prototypes.data() != a.prototypes.data());
}

TEST_CASE("two well-separated classes classify reliably at sigma 0.3") {
    // seed 1 gives prototypes with |cos| = 0.22; zero-shot accuracy pinned
    // at 0.99 from the first run of this generator, +-0.05 slack
    SimConfig cfg;
    cfg.n_classes = 2;
    cfg.dim = 2;
    cfg.n_samples = 200;
    cfg.noise_sigma = 0.3;
    cfg.master_seed = 1;
    const World world = generate_world(cfg);
    CHECK(std::abs(dot(world.prototypes.data().row(0), world.prototypes.data().row(1))) < 0.25);
    std::size_t correct = 0;
    for (const auto& s : world.samples)
        if (nearest_prototype(world, s) == s.label) ++correct;
    const double acc = static_cast<double>(correct) / cfg.n_samples;
    CHECK(std::abs(acc - 0.99) <= 0.05);
    CHECK(acc >= 0.9);
}

TEST_CASE("lambda 0 episodes coincide with regularizer-none episodes") {
    SimConfig cfg = small_config();
    const World world = generate_world(cfg);
    SimConfig l0 = cfg;
    l0.lambda = 0.0;
    SimConfig none = cfg;
    none.regularizer = Regularizer::None;
    none.lambda = 80.0;  // weight is irrelevant without a regularizer
    const SimResult a = run_episode(world, l0);
    const SimResult b = run_episode(world, none);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].probabilities == b.records[i].probabilities);
        CHECK(a.records[i].predicted == b.records[i].predicted);
    }
    CHECK(a.calibration.ece == b.calibration.ece);
}

TEST_CASE("the AD regularizer strictly raises the mean minimum angle over lambda 0") {
    SimConfig cfg = small_config();
    const World world = generate_world(cfg);
    SimConfig l0 = cfg;
    l0.lambda = 0.0;
    const SimResult base = run_episode(world, l0);
    const SimResult reg = run_episode(world, cfg);  // AD at lambda 80
    CHECK(reg.mean_min_angle > base.mean_min_angle);
}

TEST_CASE("episodes reject an empty test set") {
    SimConfig cfg = small_config();
    cfg.n_samples = 0;
    const World world = generate_world(cfg);
    CHECK_THROWS_AS(run_episode(world, cfg), EmptyLog);
}

TEST_CASE("episode records satisfy the calibration preconditions") {
    SimConfig cfg = small_config();
    const World world = generate_world(cfg);
    const SimResult r = run_episode(world, cfg);
    REQUIRE(r.records.size() == cfg.n_samples);
    for (const auto& rec : r.records) {
        double sum = 0.0;
        std::size_t argmax = 0;
        for (std::size_t k = 0; k < rec.probabilities.size(); ++k) {
            sum += rec.probabilities[k];
            if (rec.probabilities[k] > rec.probabilities[argmax]) argmax = k;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(rec.predicted == argmax);
        CHECK(rec.confidence == rec.probabilities[argmax]);
    }
    CHECK(r.per_sample.size() == cfg.n_samples);
    CHECK(r.first_sample_trace.size() == static_cast<std::size_t>(cfg.opt.steps));
}

TEST_CASE("episodes are deterministic end to end") {
    SimConfig cfg = small_config();
    const World world = generate_world(cfg);
    const std::string a = sim_result_to_json(run_episode(world, cfg)).dump();
    const std::string b = sim_result_to_json(run_episode(world, cfg)).dump();
    CHECK(a == b);
}

TEST_CASE("prompt-mode episodes run and start from the same zero-shot baseline") {
    SimConfig cfg = small_config();
    cfg.prompt_dim = 12;  // > dim, encoder invertible
    const World world = generate_world(cfg);
    cfg.lambda = 0.0;
    cfg.regularizer = Regularizer::None;
    const SimResult r = run_episode(world, cfg);
    // with lambda 0 and saturated confidence the prediction is the zero-shot
    // argmax, so prompt preimage inversion must reproduce the prototypes
    std::size_t agree = 0;
    for (std::size_t i = 0; i < world.samples.size(); ++i)
        if (r.records[i].predicted == nearest_prototype(world, world.samples[i])) ++agree;
    CHECK(agree == world.samples.size());

    SimConfig bad = cfg;
    bad.prompt_dim = 4;  // < dim
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("pareto sweep: lambda 0 arm is the standalone episode, row for row") {
    SimConfig cfg = small_config();
    const World world = generate_world(cfg);
    const auto rows = pareto_sweep({0.0, 10.0, 80.0}, world, cfg);
    REQUIRE(rows.size() == 3);
    SimConfig l0 = cfg;
    l0.lambda = 0.0;
    const SimResult solo = run_episode(world, l0);
    CHECK(rows[0].lambda == 0.0);
    CHECK(rows[0].accuracy == solo.calibration.accuracy);
    CHECK(rows[0].ece == solo.calibration.ece);
    CHECK(rows[0].mean_min_angle == solo.mean_min_angle);
    CHECK_THROWS_AS(pareto_sweep({-1.0}, world, cfg), Error);
}

TEST_CASE("regime experiment emits one row per regime per regularizer") {
    SimConfig cfg = small_config();
    cfg.n_samples = 10;
    const auto rows = regime_experiment({{12, 8}, {4, 8}}, cfg);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].n_classes == 12);
    CHECK(rows[0].regularizer == Regularizer::None);
    CHECK(rows[3].regularizer == Regularizer::AngularDiversity);
    CHECK(rows[4].n_classes == 4);
    CHECK_THROWS_AS(regime_experiment({{12, 8}}, cfg), Error);

    const std::string csv = regime_table_csv(rows);
    CHECK(csv.rfind("n_classes,dim,regularizer,ece,mean_min_angle,cos_mean,cos_std\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
}

TEST_CASE("sim config JSON round trip") {
    SimConfig cfg = small_config();
    cfg.lambda = 12.5;
    cfg.regularizer = Regularizer::Orthogonality;
    cfg.opt.steps = 3;
    const SimConfig back = sim_config_from_json(sim_config_to_json(cfg));
    CHECK(back.n_classes == cfg.n_classes);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.regularizer == cfg.regularizer);
    CHECK(back.opt.steps == cfg.opt.steps);
    CHECK(back.master_seed == cfg.master_seed);

    CHECK_THROWS_AS(sim_config_from_json({{"n_classes", 1}}), TooFewPoints);
    CHECK_THROWS_AS(sim_config_from_json({{"regularizer", "bogus"}}), Error);
}
