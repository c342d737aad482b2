#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spherecal/core.hpp"
#include "spherecal/objectives.hpp"

namespace spherecal {

struct OptimizerConfig {
    double learning_rate = 5e-3;
    int steps = 1;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool renormalize_each_step = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct OptimizerState {
    Matrix params;
    Matrix m;
    Matrix v;
    std::int64_t step_count = 0;

    static OptimizerState init(Matrix params);
};

// One bias-corrected AdamW update with decoupled weight decay. Pure: row
// renormalization is the caller's business.
OptimizerState adamw_step(OptimizerState state, const Matrix& grad, const OptimizerConfig& cfg);

struct StepRecord {
    int step = 0;
    double total_loss = 0.0;
    double tpt_term = 0.0;
    double reg_term = 0.0;
};
using LossTrace = std::vector<StepRecord>;

std::string loss_trace_csv(const LossTrace& trace);

struct TuneResult {
    FeatureMatrix features;
    LossTrace trace;
};

// Gradient steps on the raw feature rows. With the head, probabilities are
// recomputed from the features every step; with fixed probabilities they
// only shift the loss value; with nullopt the confidence term is ablated.
TuneResult tune_features(const FeatureMatrix& initial, const SoftmaxHead& head,
                         const OptimizerConfig& cfg, const CombinedLossConfig& loss_cfg);
TuneResult tune_features(const FeatureMatrix& initial,
                         const std::optional<Matrix>& fixed_probabilities,
                         const OptimizerConfig& cfg, const CombinedLossConfig& loss_cfg);

// Frozen random linear map from prompt space (P) to feature space (D),
// sampled N(0, 1/P). Stands in for a text encoder at desk scale.
class ToyEncoder {
public:
    ToyEncoder(std::size_t prompt_dim, std::size_t dim, std::uint64_t seed);
    static ToyEncoder identity(std::size_t dim);

    std::size_t prompt_dim() const noexcept { return weight_.rows(); }
    std::size_t dim() const noexcept { return weight_.cols(); }
    const Matrix& weight() const noexcept { return weight_; }

    Matrix encode(const Matrix& prompts) const;            // N x P -> N x D
    Matrix backprop(const Matrix& grad_features) const;    // dL/dE -> dL/dP

private:
    explicit ToyEncoder(Matrix weight) : weight_(std::move(weight)) {}
    Matrix weight_;
};

// Seeded standard normal prompts scaled by 1/sqrt(P).
Matrix random_prompts(std::size_t n, std::size_t prompt_dim, std::uint64_t seed);

struct PromptTuneResult {
    Matrix prompts;
    FeatureMatrix features;
    LossTrace trace;
};

// Same loop as tune_features but the parameters are prompts; the gradient
// chains through the frozen encoder. Prompt rows are never renormalized.
PromptTuneResult tune_prompts(const ToyEncoder& encoder, const Matrix& initial_prompts,
                              const SoftmaxHead& head, const OptimizerConfig& cfg,
                              const CombinedLossConfig& loss_cfg);
PromptTuneResult tune_prompts(const ToyEncoder& encoder, const Matrix& initial_prompts,
                              const std::optional<Matrix>& fixed_probabilities,
                              const OptimizerConfig& cfg, const CombinedLossConfig& loss_cfg);

struct TammesSolveConfig {
    int restarts = 10;
    int steps = 20000;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    // Optional soft-min warmup fraction before switching to the hard
    // objective; 0 runs the hard min throughout.
    double smooth_fraction = 0.0;
    double beta_start = 20.0;
    double beta_end = 200.0;
};

struct TammesRun {
    std::uint64_t seed = 0;
    double min_angle = 0.0;
};

struct TammesResult {
    FeatureMatrix features;  // best restart
    double min_angle = 0.0;
    std::vector<TammesRun> runs;
};

// Multi-start maximization of the minimum pairwise angle for n points on the
// (d-1)-sphere. Restart r uses seed cfg.seed + r.
TammesResult solve_tammes(std::size_t n, std::size_t d, const TammesSolveConfig& cfg = {});

}  // namespace spherecal
