#include "spherecal/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spherecal/io.hpp"

namespace spherecal {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
    if (steps < 1) throw Error("steps must be >= 1");
    if (weight_decay < 0.0) throw Error("weight_decay must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
        throw Error("beta1 and beta2 must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw Error("epsilon must be > 0");
}

OptimizerState OptimizerState::init(Matrix params) {
    OptimizerState s;
    s.m = Matrix(params.rows(), params.cols());
    s.v = Matrix(params.rows(), params.cols());
    s.params = std::move(params);
    s.step_count = 0;
    return s;
}

OptimizerState adamw_step(OptimizerState state, const Matrix& grad, const OptimizerConfig& cfg) {
    cfg.validate();
    if (!grad.same_shape(state.params)) throw ShapeMismatch("gradient shape != parameter shape");
    if (!grad.all_finite()) throw NonFiniteGradient();

    const std::int64_t t = state.step_count + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < state.params.rows(); ++i) {
        for (std::size_t j = 0; j < state.params.cols(); ++j) {
            const double g = grad(i, j);
            const double m = cfg.beta1 * state.m(i, j) + (1.0 - cfg.beta1) * g;
            const double v = cfg.beta2 * state.v(i, j) + (1.0 - cfg.beta2) * g * g;
            state.m(i, j) = m;
            state.v(i, j) = v;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            const double p = state.params(i, j);
            state.params(i, j) =
                p - cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) +
                                         cfg.weight_decay * p);
        }
    }
    state.step_count = t;
    return state;
}

std::string loss_trace_csv(const LossTrace& trace) {
    std::string out = "step,total_loss,tpt_term,reg_term\n";
    for (const auto& r : trace) {
        out += std::to_string(r.step);
        out += ',';
        out += format_fixed(r.total_loss, 9);
        out += ',';
        out += format_fixed(r.tpt_term, 9);
        out += ',';
        out += format_fixed(r.reg_term, 9);
        out += '\n';
    }
    return out;
}

namespace {

void renormalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double n = norm2(m.row(i));
        if (n <= kRowNormFloor) throw ZeroNormRow(i);
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) /= n;
    }
}

// One tuning loop shared by the head / fixed-probability variants.
template <typename EvalFn>
TuneResult tune_features_impl(const FeatureMatrix& initial, EvalFn&& eval,
                              const OptimizerConfig& cfg) {
    cfg.validate();
    OptimizerState state = OptimizerState::init(initial.data());
    LossTrace trace;
    trace.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 1; step <= cfg.steps; ++step) {
        const CombinedEval e = eval(FeatureMatrix(state.params));
        trace.push_back({step, e.value, e.tpt_term, e.reg_term});
        state = adamw_step(std::move(state), e.grad, cfg);
        if (cfg.renormalize_each_step) renormalize_rows(state.params);
    }
    return {FeatureMatrix(std::move(state.params)), std::move(trace)};
}

template <typename EvalFn>
PromptTuneResult tune_prompts_impl(const ToyEncoder& encoder, const Matrix& initial_prompts,
                                   EvalFn&& eval, const OptimizerConfig& cfg) {
    cfg.validate();
    if (initial_prompts.cols() != encoder.prompt_dim())
        throw ShapeMismatch("prompt width != encoder prompt dimension");
    OptimizerState state = OptimizerState::init(initial_prompts);
    LossTrace trace;
    trace.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 1; step <= cfg.steps; ++step) {
        const CombinedEval e = eval(FeatureMatrix(encoder.encode(state.params)));
        trace.push_back({step, e.value, e.tpt_term, e.reg_term});
        state = adamw_step(std::move(state), encoder.backprop(e.grad), cfg);
    }
    Matrix features = encoder.encode(state.params);
    return {std::move(state.params), FeatureMatrix(std::move(features)), std::move(trace)};
}

}  // namespace

TuneResult tune_features(const FeatureMatrix& initial, const SoftmaxHead& head,
                         const OptimizerConfig& cfg, const CombinedLossConfig& loss_cfg) {
    return tune_features_impl(
        initial, [&](const FeatureMatrix& f) { return combined_loss(f, head, loss_cfg); }, cfg);
}

TuneResult tune_features(const FeatureMatrix& initial,
                         const std::optional<Matrix>& fixed_probabilities,
                         const OptimizerConfig& cfg, const CombinedLossConfig& loss_cfg) {
    const Matrix probs = fixed_probabilities.value_or(Matrix());
    return tune_features_impl(
        initial, [&](const FeatureMatrix& f) { return combined_loss(f, probs, loss_cfg); }, cfg);
}

ToyEncoder::ToyEncoder(std::size_t prompt_dim, std::size_t dim, std::uint64_t seed) {
    if (prompt_dim == 0 || dim == 0) throw Error("encoder dimensions must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(prompt_dim));
    weight_ = Matrix(prompt_dim, dim);
    for (std::size_t i = 0; i < prompt_dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) weight_(i, j) = normal(rng) * scale;
}

ToyEncoder ToyEncoder::identity(std::size_t dim) {
    Matrix w(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) w(i, i) = 1.0;
    return ToyEncoder(std::move(w));
}

Matrix ToyEncoder::encode(const Matrix& prompts) const {
    if (prompts.cols() != weight_.rows())
        throw ShapeMismatch("prompt width != encoder prompt dimension");
    return matmul(prompts, weight_);
}

Matrix ToyEncoder::backprop(const Matrix& grad_features) const {
    if (grad_features.cols() != weight_.cols())
        throw ShapeMismatch("feature-gradient width != encoder output dimension");
    Matrix grad(grad_features.rows(), weight_.rows());
    for (std::size_t i = 0; i < grad.rows(); ++i)
        for (std::size_t p = 0; p < weight_.rows(); ++p)
            grad(i, p) = dot(grad_features.row(i), weight_.row(p));
    return grad;
}

Matrix random_prompts(std::size_t n, std::size_t prompt_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(prompt_dim));
    Matrix p(n, prompt_dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < prompt_dim; ++j) p(i, j) = normal(rng) * scale;
    return p;
}

PromptTuneResult tune_prompts(const ToyEncoder& encoder, const Matrix& initial_prompts,
                              const SoftmaxHead& head, const OptimizerConfig& cfg,
                              const CombinedLossConfig& loss_cfg) {
    return tune_prompts_impl(
        encoder, initial_prompts,
        [&](const FeatureMatrix& f) { return combined_loss(f, head, loss_cfg); }, cfg);
}

PromptTuneResult tune_prompts(const ToyEncoder& encoder, const Matrix& initial_prompts,
                              const std::optional<Matrix>& fixed_probabilities,
                              const OptimizerConfig& cfg, const CombinedLossConfig& loss_cfg) {
    const Matrix probs = fixed_probabilities.value_or(Matrix());
    return tune_prompts_impl(
        encoder, initial_prompts,
        [&](const FeatureMatrix& f) { return combined_loss(f, probs, loss_cfg); }, cfg);
}

namespace {

Matrix random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        double nm = 0.0;
        do {
            for (std::size_t j = 0; j < d; ++j) m(i, j) = normal(rng);
            nm = norm2(m.row(i));
        } while (nm <= 1e-6);
        for (std::size_t j = 0; j < d; ++j) m(i, j) /= nm;
    }
    return m;
}

}  // namespace

TammesResult solve_tammes(std::size_t n, std::size_t d, const TammesSolveConfig& cfg) {
    if (n < 2) throw TooFewPoints(n);
    if (d < 2) throw UnsupportedDimension("need dimension >= 2");
    if (cfg.restarts < 1) throw Error("restarts must be >= 1");

    OptimizerConfig opt;
    opt.learning_rate = cfg.learning_rate;
    opt.steps = 1;  // stepped manually below
    opt.renormalize_each_step = true;

    std::optional<FeatureMatrix> best_features;
    double best_angle = -1.0;
    std::vector<TammesRun> runs;
    for (int r = 0; r < cfg.restarts; ++r) {
        const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(r);
        OptimizerState state = OptimizerState::init(random_unit_rows(n, d, run_seed));
        const int smooth_steps =
            static_cast<int>(cfg.smooth_fraction * static_cast<double>(cfg.steps));
        for (int step = 0; step < cfg.steps; ++step) {
            AngularDiversityOptions ad;
            if (step < smooth_steps) {
                ad.smooth_min = true;
                const double f = smooth_steps > 1
                                     ? static_cast<double>(step) / (smooth_steps - 1)
                                     : 1.0;
                ad.beta = cfg.beta_start * std::pow(cfg.beta_end / cfg.beta_start, f);
            }
            const ObjectiveEval e = angular_diversity(FeatureMatrix(state.params), ad);
            state = adamw_step(std::move(state), e.grad, opt);
            renormalize_rows(state.params);
        }
        FeatureMatrix final_features(std::move(state.params));
        const double angle = min_pairwise_angle(final_features);
        runs.push_back({run_seed, angle});
        if (angle > best_angle) {
            best_angle = angle;
            best_features = std::move(final_features);
        }
    }
    return {std::move(*best_features), best_angle, std::move(runs)};
}

}  // namespace spherecal
