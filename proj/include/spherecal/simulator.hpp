#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "spherecal/calibration.hpp"
#include "spherecal/core.hpp"
#include "spherecal/objectives.hpp"
#include "spherecal/optimizer.hpp"

namespace spherecal {

struct SimConfig {
    std::size_t n_classes = 10;
    std::size_t dim = 64;
    std::size_t prompt_dim = 0;  // 0 tunes features directly; > 0 tunes prompts
    std::size_t n_samples = 100;
    double noise_sigma = 0.1;
    double temperature = 0.01;
    double lambda = 80.0;
    Regularizer regularizer = Regularizer::AngularDiversity;
    TptMode tpt_mode = TptMode::MaxLogProb;
    std::uint64_t master_seed = 0;
    int n_bins = 15;
    OptimizerConfig opt;  // single-step, lr 5e-3 by default

    void validate() const;
};

struct TestSample {
    std::vector<double> image;
    std::size_t label = 0;
};

struct World {
    FeatureMatrix prototypes;  // N x D unit rows
    std::vector<TestSample> samples;
};

// Prototypes uniform on the sphere, samples = normalize(prototype + sigma *
// gaussian) with uniform labels; everything derives from master_seed.
World generate_world(const SimConfig& cfg);

struct SampleStats {
    double cos_mean = 0.0;  // mean off-diagonal cosine of the tuned features
    double cos_std = 0.0;   // std of those cosines within the sample
    double min_angle = 0.0;
};

struct SimResult {
    CalibrationReport calibration;
    double mean_min_angle = 0.0;
    double mean_cos_mean = 0.0;
    double mean_cos_std = 0.0;        // mean over samples of the within-sample std
    double cos_mean_across_std = 0.0; // std across samples of the per-sample mean
    std::vector<PredictionRecord> records;
    std::vector<SampleStats> per_sample;
    LossTrace first_sample_trace;  // tuning trace of sample 0, for diagnostics
};

// Episodic protocol: each test sample starts from the untouched prototypes
// (or their prompt preimage), takes cfg.opt.steps tuning steps against its
// own probabilities, and the post-tuning prediction is logged.
SimResult run_episode(const World& world, const SimConfig& cfg);

struct RegimeRow {
    std::size_t n_classes = 0;
    std::size_t dim = 0;
    Regularizer regularizer = Regularizer::None;
    double ece = 0.0;
    double mean_min_angle = 0.0;
    double cos_mean = 0.0;
    double cos_std = 0.0;
};

// Matched episodes (shared world per regime) for every regularizer. The
// regime list must contain at least one N > D and one N < D entry.
std::vector<RegimeRow> regime_experiment(
    const std::vector<std::pair<std::size_t, std::size_t>>& regimes, const SimConfig& tmpl);
std::string regime_table_csv(const std::vector<RegimeRow>& rows);

struct ParetoRow {
    double lambda = 0.0;
    double accuracy = 0.0;
    double ece = 0.0;
    double mean_min_angle = 0.0;
};

// One episode per lambda on a shared world.
std::vector<ParetoRow> pareto_sweep(const std::vector<double>& lambdas, const World& world,
                                    const SimConfig& cfg);
std::string pareto_table_csv(const std::vector<ParetoRow>& rows);

SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& cfg);
nlohmann::json sim_result_to_json(const SimResult& result);

}  // namespace spherecal
