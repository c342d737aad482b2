#include "spherecal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spherecal/io.hpp"

namespace spherecal {

namespace {

// Independent substreams of the master seed. Sample s uses stream 1 + s,
// the prototypes stream 0, the encoder its own tag, so no two generators
// start from the same state.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kPrototypeStream = 0;
constexpr std::uint64_t kEncoderStream = 0xE0C0DE;
constexpr std::uint64_t kSampleStreamBase = 1;

std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t d) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(d);
    for (double& x : v) x = normal(rng);
    return v;
}

void normalize_in_place(std::vector<double>& v) {
    const double n = norm2(v);
    if (n <= kRowNormFloor) throw ZeroNormRow(0);
    for (double& x : v) x /= n;
}

// Minimum-norm prompt rows q with q * W = targets, via Cholesky on W^T W.
// Needs prompt_dim >= dim so the encoder has full column rank.
Matrix solve_prompt_preimage(const ToyEncoder& encoder, const Matrix& targets) {
    const Matrix& w = encoder.weight();  // P x D
    const std::size_t p = w.rows(), d = w.cols();
    if (p < d) throw ShapeMismatch("prompt_dim must be >= dim to invert the encoder");

    Matrix gram(d, d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            double s = 0.0;
            for (std::size_t r = 0; r < p; ++r) s += w(r, a) * w(r, b);
            gram(a, b) = gram(b, a) = s;
        }
    // Cholesky gram = L L^T
    Matrix chol(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = gram(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= chol(i, k) * chol(j, k);
            if (i == j) {
                if (s <= 0.0) throw Error("encoder weight is rank-deficient");
                chol(i, j) = std::sqrt(s);
            } else {
                chol(i, j) = s / chol(j, j);
            }
        }
    }
    auto solve_spd = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < d; ++i) {  // L y = x
            for (std::size_t k = 0; k < i; ++k) x[i] -= chol(i, k) * x[k];
            x[i] /= chol(i, i);
        }
        for (std::size_t ii = d; ii-- > 0;) {  // L^T z = y
            for (std::size_t k = ii + 1; k < d; ++k) x[ii] -= chol(k, ii) * x[k];
            x[ii] /= chol(ii, ii);
        }
    };

    Matrix prompts(targets.rows(), p);
    std::vector<double> y(d);
    for (std::size_t i = 0; i < targets.rows(); ++i) {
        for (std::size_t a = 0; a < d; ++a) y[a] = targets(i, a);
        solve_spd(y);  // y = (W^T W)^-1 t_i
        for (std::size_t r = 0; r < p; ++r) {
            double s = 0.0;
            for (std::size_t a = 0; a < d; ++a) s += w(r, a) * y[a];
            prompts(i, r) = s;
        }
    }
    return prompts;
}

SampleStats feature_stats(const FeatureMatrix& features) {
    const Matrix unit = normalize(features).data();
    const std::size_t n = unit.rows();
    SampleStats st;
    double sum = 0.0, sum_sq = 0.0;
    double max_cos = -1.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double c = dot(unit.row(i), unit.row(j));
            sum += c;
            sum_sq += c * c;
            max_cos = std::max(max_cos, c);
            ++pairs;
        }
    st.cos_mean = sum / static_cast<double>(pairs);
    st.cos_std = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(pairs) -
                                             st.cos_mean * st.cos_mean));
    st.min_angle = std::acos(clamp_cosine(max_cos));
    return st;
}

}  // namespace

void SimConfig::validate() const {
    if (n_classes < 2) throw TooFewPoints(n_classes);
    if (dim < 1) throw Error("dim must be >= 1");
    if (!(noise_sigma > 0.0)) throw Error("noise_sigma must be > 0");
    if (!(temperature > 0.0)) throw Error("temperature must be > 0");
    if (lambda < 0.0) throw Error("lambda must be >= 0");
    if (n_bins < 1) throw Error("n_bins must be >= 1");
    if (prompt_dim > 0 && prompt_dim < dim)
        throw Error("prompt_dim must be 0 (feature tuning) or >= dim");
    opt.validate();
}

World generate_world(const SimConfig& cfg) {
    cfg.validate();
    std::mt19937_64 proto_rng(stream_seed(cfg.master_seed, kPrototypeStream));
    Matrix protos(cfg.n_classes, cfg.dim);
    for (std::size_t i = 0; i < cfg.n_classes; ++i) {
        std::vector<double> v;
        do {
            v = normal_vector(proto_rng, cfg.dim);
        } while (norm2(v) <= 1e-6);
        normalize_in_place(v);
        for (std::size_t j = 0; j < cfg.dim; ++j) protos(i, j) = v[j];
    }
    World world{FeatureMatrix(std::move(protos)), {}};
    world.samples.reserve(cfg.n_samples);
    for (std::size_t s = 0; s < cfg.n_samples; ++s) {
        std::mt19937_64 rng(stream_seed(cfg.master_seed, kSampleStreamBase + s));
        std::uniform_int_distribution<std::size_t> pick(0, cfg.n_classes - 1);
        TestSample sample;
        sample.label = pick(rng);
        sample.image = normal_vector(rng, cfg.dim);
        const auto proto = world.prototypes.data().row(sample.label);
        for (std::size_t j = 0; j < cfg.dim; ++j)
            sample.image[j] = proto[j] + cfg.noise_sigma * sample.image[j];
        normalize_in_place(sample.image);
        world.samples.push_back(std::move(sample));
    }
    return world;
}

SimResult run_episode(const World& world, const SimConfig& cfg) {
    cfg.validate();
    if (world.samples.empty()) throw EmptyLog();

    CombinedLossConfig loss_cfg;
    loss_cfg.lambda = cfg.lambda;
    loss_cfg.temperature = cfg.temperature;
    loss_cfg.regularizer = cfg.regularizer;
    loss_cfg.tpt_mode = cfg.tpt_mode;

    const bool prompt_mode = cfg.prompt_dim > 0;
    ToyEncoder encoder = prompt_mode
                             ? ToyEncoder(cfg.prompt_dim, cfg.dim,
                                          stream_seed(cfg.master_seed, kEncoderStream))
                             : ToyEncoder::identity(cfg.dim);
    // Initial parameters always map onto the prototypes, so the zero-shot
    // baseline is the same in both modes.
    const Matrix initial_prompts =
        prompt_mode ? solve_prompt_preimage(encoder, world.prototypes.data()) : Matrix();

    SimResult result;
    result.records.reserve(world.samples.size());
    result.per_sample.reserve(world.samples.size());

    bool first = true;
    for (const auto& sample : world.samples) {
        const SoftmaxHead head(sample.image, cfg.temperature);
        LossTrace trace;
        FeatureMatrix tuned = [&] {
            if (prompt_mode) {
                auto r = tune_prompts(encoder, initial_prompts, head, cfg.opt, loss_cfg);
                trace = std::move(r.trace);
                return std::move(r.features);
            }
            auto r = tune_features(world.prototypes, head, cfg.opt, loss_cfg);
            trace = std::move(r.trace);
            return std::move(r.features);
        }();
        if (first) {
            result.first_sample_trace = std::move(trace);
            first = false;
        }
        const Matrix probs = head.probabilities(tuned);
        std::vector<double> row(probs.cols());
        for (std::size_t k = 0; k < probs.cols(); ++k) row[k] = probs(0, k);
        result.records.push_back(
            PredictionRecord::from_probabilities(std::move(row), sample.label));
        result.per_sample.push_back(feature_stats(tuned));
    }

    double mm = 0.0, cm = 0.0, cs = 0.0;
    for (const auto& st : result.per_sample) {
        mm += st.min_angle;
        cm += st.cos_mean;
        cs += st.cos_std;
    }
    const double n = static_cast<double>(result.per_sample.size());
    result.mean_min_angle = mm / n;
    result.mean_cos_mean = cm / n;
    result.mean_cos_std = cs / n;
    double dev2 = 0.0;
    for (const auto& st : result.per_sample) {
        const double d = st.cos_mean - result.mean_cos_mean;
        dev2 += d * d;
    }
    result.cos_mean_across_std = std::sqrt(dev2 / n);
    result.calibration = compute_ece(result.records, cfg.n_bins);
    return result;
}

std::vector<RegimeRow> regime_experiment(
    const std::vector<std::pair<std::size_t, std::size_t>>& regimes, const SimConfig& tmpl) {
    bool has_over = false, has_under = false;
    for (const auto& [n, d] : regimes) {
        if (n > d) has_over = true;
        if (n < d) has_under = true;
    }
    if (!has_over || !has_under)
        throw Error("regimes must include one N > D and one N < D case");

    const Regularizer regs[] = {Regularizer::None, Regularizer::Atfd,
                                Regularizer::Orthogonality, Regularizer::AngularDiversity};
    std::vector<RegimeRow> rows;
    for (const auto& [n, d] : regimes) {
        SimConfig cfg = tmpl;
        cfg.n_classes = n;
        cfg.dim = d;
        const World world = generate_world(cfg);  // shared across regularizers
        for (Regularizer reg : regs) {
            SimConfig run_cfg = cfg;
            run_cfg.regularizer = reg;
            const SimResult res = run_episode(world, run_cfg);
            // cos_std is the sample-to-sample spread of the per-sample mean
            // cosine: the consistency statistic, not the within-sample spread.
            rows.push_back({n, d, reg, res.calibration.ece, res.mean_min_angle,
                            res.mean_cos_mean, res.cos_mean_across_std});
        }
    }
    return rows;
}

std::string regime_table_csv(const std::vector<RegimeRow>& rows) {
    std::string out = "n_classes,dim,regularizer,ece,mean_min_angle,cos_mean,cos_std\n";
    for (const auto& r : rows) {
        out += std::to_string(r.n_classes);
        out += ',';
        out += std::to_string(r.dim);
        out += ',';
        out += to_string(r.regularizer);
        out += ',';
        out += format_shortest(r.ece);
        out += ',';
        out += format_shortest(r.mean_min_angle);
        out += ',';
        out += format_shortest(r.cos_mean);
        out += ',';
        out += format_shortest(r.cos_std);
        out += '\n';
    }
    return out;
}

std::vector<ParetoRow> pareto_sweep(const std::vector<double>& lambdas, const World& world,
                                    const SimConfig& cfg) {
    std::vector<ParetoRow> rows;
    rows.reserve(lambdas.size());
    for (double lambda : lambdas) {
        if (lambda < 0.0) throw Error("lambda values must be >= 0");
        SimConfig run_cfg = cfg;
        run_cfg.lambda = lambda;
        const SimResult res = run_episode(world, run_cfg);
        rows.push_back({lambda, res.calibration.accuracy, res.calibration.ece,
                        res.mean_min_angle});
    }
    return rows;
}

std::string pareto_table_csv(const std::vector<ParetoRow>& rows) {
    std::string out = "lambda,accuracy,ece,mean_min_angle\n";
    for (const auto& r : rows) {
        out += format_shortest(r.lambda);
        out += ',';
        out += format_shortest(r.accuracy);
        out += ',';
        out += format_shortest(r.ece);
        out += ',';
        out += format_shortest(r.mean_min_angle);
        out += '\n';
    }
    return out;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
    SimConfig cfg;
    cfg.n_classes = j.value("n_classes", cfg.n_classes);
    cfg.dim = j.value("dim", cfg.dim);
    cfg.prompt_dim = j.value("prompt_dim", cfg.prompt_dim);
    cfg.n_samples = j.value("n_samples", cfg.n_samples);
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.lambda = j.value("lambda", cfg.lambda);
    if (j.contains("regularizer"))
        cfg.regularizer = regularizer_from_string(j.at("regularizer").get<std::string>());
    if (j.contains("tpt_mode")) cfg.tpt_mode = tpt_mode_from_string(j.at("tpt_mode").get<std::string>());
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.n_bins = j.value("n_bins", cfg.n_bins);
    cfg.opt.learning_rate = j.value("learning_rate", cfg.opt.learning_rate);
    cfg.opt.steps = j.value("steps", cfg.opt.steps);
    cfg.opt.weight_decay = j.value("weight_decay", cfg.opt.weight_decay);
    cfg.opt.beta1 = j.value("beta1", cfg.opt.beta1);
    cfg.opt.beta2 = j.value("beta2", cfg.opt.beta2);
    cfg.opt.epsilon = j.value("epsilon", cfg.opt.epsilon);
    cfg.opt.renormalize_each_step = j.value("renormalize_each_step", cfg.opt.renormalize_each_step);
    cfg.opt.seed = cfg.master_seed;
    cfg.validate();
    return cfg;
}

nlohmann::json sim_config_to_json(const SimConfig& cfg) {
    return {{"n_classes", cfg.n_classes},
            {"dim", cfg.dim},
            {"prompt_dim", cfg.prompt_dim},
            {"n_samples", cfg.n_samples},
            {"noise_sigma", cfg.noise_sigma},
            {"temperature", cfg.temperature},
            {"lambda", cfg.lambda},
            {"regularizer", to_string(cfg.regularizer)},
            {"tpt_mode", to_string(cfg.tpt_mode)},
            {"master_seed", cfg.master_seed},
            {"n_bins", cfg.n_bins},
            {"learning_rate", cfg.opt.learning_rate},
            {"steps", cfg.opt.steps},
            {"weight_decay", cfg.opt.weight_decay},
            {"beta1", cfg.opt.beta1},
            {"beta2", cfg.opt.beta2},
            {"epsilon", cfg.opt.epsilon},
            {"renormalize_each_step", cfg.opt.renormalize_each_step}};
}

nlohmann::json sim_result_to_json(const SimResult& result) {
    nlohmann::json per_sample = nlohmann::json::array();
    for (const auto& st : result.per_sample)
        per_sample.push_back({{"cos_mean", st.cos_mean},
                              {"cos_std", st.cos_std},
                              {"min_angle", st.min_angle}});
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : result.records)
        records.push_back({{"true_class", r.true_class},
                           {"predicted", r.predicted},
                           {"confidence", r.confidence}});
    return {{"calibration", report_to_json(result.calibration)},
            {"mean_min_angle", result.mean_min_angle},
            {"mean_cos_mean", result.mean_cos_mean},
            {"mean_cos_std", result.mean_cos_std},
            {"cos_mean_across_std", result.cos_mean_across_std},
            {"per_sample", per_sample},
            {"records", records}};
}

}  // namespace spherecal
