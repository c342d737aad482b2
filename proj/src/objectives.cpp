#include "spherecal/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spherecal {

namespace {

// Shared per-evaluation geometry. raw_cos keeps the unclamped dot products;
// cos is clamped off-diagonal so arccos and its derivative stay finite.
struct Geometry {
    Matrix unit;                // normalized rows
    std::vector<double> norms;  // raw row norms
    Matrix raw_cos;
    Matrix cos;
    Matrix theta;
};

Geometry analyze(const FeatureMatrix& features) {
    const Matrix& e = features.data();
    const std::size_t n = e.rows(), d = e.cols();
    Geometry g;
    g.unit = Matrix(n, d);
    g.norms.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double nm = norm2(e.row(i));
        if (nm <= kRowNormFloor) throw ZeroNormRow(i);
        g.norms[i] = nm;
        for (std::size_t j = 0; j < d; ++j) g.unit(i, j) = e(i, j) / nm;
    }
    g.raw_cos = Matrix(n, n);
    g.cos = Matrix(n, n);
    g.theta = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        g.raw_cos(i, i) = 1.0;
        g.cos(i, i) = 1.0;
        g.theta(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double raw = dot(g.unit.row(i), g.unit.row(j));
            const double c = clamp_cosine(raw);
            const double th = std::acos(c);
            g.raw_cos(i, j) = g.raw_cos(j, i) = raw;
            g.cos(i, j) = g.cos(j, i) = c;
            g.theta(i, j) = g.theta(j, i) = th;
        }
    }
    return g;
}

// Adds w * d(theta_ij)/dE to grad. The sine in the arccos chain comes from
// the raw cosine, so the row-i norm of d(theta_ij)/dE is 1/||e_i|| at every
// separation: the repulsion between nearly coincident rows never dies, which
// is what distinguishes this objective from the cosine penalty. Exactly
// coincident or antipodal rows have no usable direction and contribute
// nothing.
void accumulate_angle_grad(Matrix& grad, const Geometry& g, std::size_t i, std::size_t j,
                           double w) {
    const double raw = g.raw_cos(i, j);
    const double sin_sq = (1.0 - raw) * (1.0 + raw);
    if (sin_sq <= 0.0) return;
    const double sin_th = std::sqrt(sin_sq);
    const double ci = -w / (sin_th * g.norms[i]);
    const double cj = -w / (sin_th * g.norms[j]);
    for (std::size_t k = 0; k < grad.cols(); ++k) {
        grad(i, k) += ci * (g.unit(j, k) - raw * g.unit(i, k));
        grad(j, k) += cj * (g.unit(i, k) - raw * g.unit(j, k));
    }
}

}  // namespace

Regularizer regularizer_from_string(const std::string& name) {
    if (name == "none") return Regularizer::None;
    if (name == "atfd") return Regularizer::Atfd;
    if (name == "orthogonality") return Regularizer::Orthogonality;
    if (name == "angular_diversity") return Regularizer::AngularDiversity;
    throw Error("unknown regularizer '" + name + "'");
}

std::string to_string(Regularizer reg) {
    switch (reg) {
        case Regularizer::None: return "none";
        case Regularizer::Atfd: return "atfd";
        case Regularizer::Orthogonality: return "orthogonality";
        case Regularizer::AngularDiversity: return "angular_diversity";
    }
    return "?";
}

TptMode tpt_mode_from_string(const std::string& name) {
    if (name == "max_log_prob") return TptMode::MaxLogProb;
    if (name == "entropy") return TptMode::Entropy;
    throw Error("unknown tpt mode '" + name + "'");
}

std::string to_string(TptMode mode) {
    return mode == TptMode::MaxLogProb ? "max_log_prob" : "entropy";
}

void CombinedLossConfig::validate() const {
    if (lambda < 0.0) throw Error("lambda must be >= 0");
    if (!(temperature > 0.0)) throw Error("temperature must be > 0");
}

ObjectiveEval angular_diversity(const FeatureMatrix& features, const AngularDiversityOptions& opts) {
    const std::size_t n = features.n_classes();
    const Geometry g = analyze(features);

    ObjectiveEval out;
    out.grad = Matrix(n, features.dim());

    if (opts.smooth_min) {
        // Soft minimum: -1/beta * log sum_j exp(-beta * theta_ij), stabilized
        // around each row's hard minimum.
        double total = 0.0;
        const double beta = opts.beta;
        for (std::size_t i = 0; i < n; ++i) {
            double mn = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) mn = std::min(mn, g.theta(i, j));
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) z += std::exp(-beta * (g.theta(i, j) - mn));
            total += mn - std::log(z) / beta;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double w = std::exp(-beta * (g.theta(i, j) - mn)) / z;
                // d(loss)/d(theta_ij) = -w / n for the i-th soft-min term
                accumulate_angle_grad(out.grad, g, i, j, -w / static_cast<double>(n));
            }
        }
        out.value = -total / static_cast<double>(n);
        return out;
    }

    double ad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mn = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) mn = std::min(mn, g.theta(i, j));
        ad += mn;
        std::vector<std::size_t> tied;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && g.theta(i, j) <= mn + kTieTolerance) tied.push_back(j);
        const double w = -1.0 / (static_cast<double>(n) * static_cast<double>(tied.size()));
        for (std::size_t j : tied) accumulate_angle_grad(out.grad, g, i, j, w);
    }
    out.value = -ad / static_cast<double>(n);
    return out;
}

ObjectiveEval orthogonality_loss(const FeatureMatrix& features) {
    const std::size_t n = features.n_classes();
    const Geometry g = analyze(features);

    ObjectiveEval out;
    out.grad = Matrix(n, features.dim());
    double sum_sq = 0.0;
    const double scale = 2.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double c = g.cos(i, j);
            sum_sq += c * c;
            // d(c^2)/dE through d(cos)/de, clamp pass-through
            const double coef = scale * 2.0 * c;
            const double raw = g.raw_cos(i, j);
            for (std::size_t k = 0; k < out.grad.cols(); ++k) {
                out.grad(i, k) += coef * (g.unit(j, k) - raw * g.unit(i, k)) / g.norms[i];
                out.grad(j, k) += coef * (g.unit(i, k) - raw * g.unit(j, k)) / g.norms[j];
            }
        }
    }
    out.value = scale * sum_sq;
    return out;
}

ObjectiveEval atfd_loss(const FeatureMatrix& features) {
    const std::size_t n = features.n_classes();
    const std::size_t d = features.dim();
    const Geometry g = analyze(features);

    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) centroid[k] += g.unit(i, k) / static_cast<double>(n);

    // u_i = (unit_i - centroid) / ||unit_i - centroid||; rows sitting exactly
    // on the centroid get a zero subgradient.
    Matrix u(n, d);
    double mean_dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dist2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double r = g.unit(i, k) - centroid[k];
            u(i, k) = r;
            dist2 += r * r;
        }
        const double dist = std::sqrt(dist2);
        mean_dist += dist / static_cast<double>(n);
        if (dist > 1e-30) {
            for (std::size_t k = 0; k < d; ++k) u(i, k) /= dist;
        } else {
            for (std::size_t k = 0; k < d; ++k) u(i, k) = 0.0;
        }
    }
    std::vector<double> u_mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) u_mean[k] += u(i, k) / static_cast<double>(n);

    ObjectiveEval out;
    out.value = -mean_dist;
    out.grad = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        // gradient w.r.t. the normalized row, then projected to the raw row
        std::vector<double> gn(d);
        for (std::size_t k = 0; k < d; ++k)
            gn[k] = -(u(i, k) - u_mean[k]) / static_cast<double>(n);
        double along = 0.0;
        for (std::size_t k = 0; k < d; ++k) along += gn[k] * g.unit(i, k);
        for (std::size_t k = 0; k < d; ++k)
            out.grad(i, k) = (gn[k] - along * g.unit(i, k)) / g.norms[i];
    }
    return out;
}

TptEval tpt_loss(const Matrix& probabilities, TptMode mode) {
    const std::size_t b = probabilities.rows();
    const std::size_t k = probabilities.cols();
    if (b == 0 || k == 0) throw DegenerateProbability("empty probability batch");

    for (std::size_t r = 0; r < b; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double p = probabilities(r, c);
            if (!std::isfinite(p) || p < 0.0)
                throw DegenerateProbability("probability row " + std::to_string(r) +
                                            " has a negative or non-finite entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw DegenerateProbability("probability row " + std::to_string(r) +
                                        " does not sum to 1");
    }

    TptEval out;
    out.grad_logits = Matrix(b, k);
    const double inv_b = 1.0 / static_cast<double>(b);
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        if (mode == TptMode::MaxLogProb) {
            std::size_t m = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (probabilities(r, c) > probabilities(r, m)) m = c;
            total += -std::log(std::max(probabilities(r, m), kProbFloor));
            for (std::size_t c = 0; c < k; ++c)
                out.grad_logits(r, c) = (probabilities(r, c) - (c == m ? 1.0 : 0.0)) * inv_b;
        } else {
            double h = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double p = probabilities(r, c);
                h -= p * std::log(std::max(p, kProbFloor));
            }
            total += h;
            for (std::size_t c = 0; c < k; ++c) {
                const double p = probabilities(r, c);
                out.grad_logits(r, c) =
                    -p * (std::log(std::max(p, kProbFloor)) + h) * inv_b;
            }
        }
    }
    out.value = total * inv_b;
    return out;
}

SoftmaxHead::SoftmaxHead(std::vector<double> image_feature, double temperature)
    : image_(std::move(image_feature)), tau_(temperature) {
    if (image_.empty()) throw Error("image feature is empty");
    if (!(tau_ > 0.0)) throw Error("temperature must be > 0");
}

Matrix SoftmaxHead::probabilities(const FeatureMatrix& features) const {
    if (features.dim() != image_.size())
        throw ShapeMismatch("image feature dimension does not match the feature matrix");
    const Matrix unit = normalize(features).data();
    const std::size_t n = unit.rows();
    std::vector<double> z(n);
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = dot(unit.row(i), std::span<const double>(image_)) / tau_;
        zmax = std::max(zmax, z[i]);
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) denom += std::exp(z[i] - zmax);
    Matrix p(1, n);
    for (std::size_t i = 0; i < n; ++i) p(0, i) = std::exp(z[i] - zmax) / denom;
    return p;
}

Matrix SoftmaxHead::backprop_to_features(const FeatureMatrix& features,
                                         const Matrix& grad_logits) const {
    if (grad_logits.rows() != 1 || grad_logits.cols() != features.n_classes())
        throw ShapeMismatch("logit gradient shape does not match the feature matrix");
    const Matrix& e = features.data();
    const std::size_t n = e.rows(), d = e.cols();
    Matrix grad(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double nm = norm2(e.row(i));
        if (nm <= kRowNormFloor) throw ZeroNormRow(i);
        double s = 0.0;  // cos(unit_i, v)
        for (std::size_t k = 0; k < d; ++k) s += e(i, k) / nm * image_[k];
        const double coef = grad_logits(0, i) / tau_;
        for (std::size_t k = 0; k < d; ++k)
            grad(i, k) = coef * (image_[k] - s * e(i, k) / nm) / nm;
    }
    return grad;
}

ObjectiveEval regularizer_loss(const FeatureMatrix& features, Regularizer reg,
                               const AngularDiversityOptions& ad) {
    switch (reg) {
        case Regularizer::None: {
            ObjectiveEval out;
            out.grad = Matrix(features.n_classes(), features.dim());
            return out;
        }
        case Regularizer::Atfd: return atfd_loss(features);
        case Regularizer::Orthogonality: return orthogonality_loss(features);
        case Regularizer::AngularDiversity: return angular_diversity(features, ad);
    }
    throw Error("unreachable regularizer");
}

CombinedEval combined_loss(const FeatureMatrix& features, const Matrix& probabilities,
                           const CombinedLossConfig& cfg) {
    cfg.validate();
    CombinedEval out;
    ObjectiveEval reg = regularizer_loss(features, cfg.regularizer, cfg.ad);
    out.reg_term = reg.value;
    out.grad = std::move(reg.grad);
    for (std::size_t i = 0; i < out.grad.rows(); ++i)
        for (std::size_t k = 0; k < out.grad.cols(); ++k) out.grad(i, k) *= cfg.lambda;
    if (!probabilities.empty()) out.tpt_term = tpt_loss(probabilities, cfg.tpt_mode).value;
    out.value = out.tpt_term + cfg.lambda * out.reg_term;
    return out;
}

CombinedEval combined_loss(const FeatureMatrix& features, const SoftmaxHead& head,
                           const CombinedLossConfig& cfg) {
    cfg.validate();
    CombinedEval out;
    const Matrix probs = head.probabilities(features);
    const TptEval tpt = tpt_loss(probs, cfg.tpt_mode);
    out.tpt_term = tpt.value;
    out.grad = head.backprop_to_features(features, tpt.grad_logits);
    ObjectiveEval reg = regularizer_loss(features, cfg.regularizer, cfg.ad);
    out.reg_term = reg.value;
    for (std::size_t i = 0; i < out.grad.rows(); ++i)
        for (std::size_t k = 0; k < out.grad.cols(); ++k)
            out.grad(i, k) += cfg.lambda * reg.grad(i, k);
    out.value = out.tpt_term + cfg.lambda * out.reg_term;
    return out;
}

}  // namespace spherecal
