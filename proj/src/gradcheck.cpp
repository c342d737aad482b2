#include "spherecal/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "spherecal/io.hpp"

namespace spherecal {

ObjectiveKind objective_from_string(const std::string& name) {
    if (name == "angular_diversity") return ObjectiveKind::AngularDiversity;
    if (name == "orthogonality") return ObjectiveKind::Orthogonality;
    if (name == "atfd") return ObjectiveKind::Atfd;
    throw Error("unknown objective '" + name + "'");
}

std::string to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::AngularDiversity: return "angular_diversity";
        case ObjectiveKind::Orthogonality: return "orthogonality";
        case ObjectiveKind::Atfd: return "atfd";
    }
    return "?";
}

ObjectiveEval objective_eval(ObjectiveKind kind, const FeatureMatrix& features) {
    switch (kind) {
        case ObjectiveKind::AngularDiversity: return angular_diversity(features);
        case ObjectiveKind::Orthogonality: return orthogonality_loss(features);
        case ObjectiveKind::Atfd: return atfd_loss(features);
    }
    throw Error("unreachable objective");
}

double objective_value(ObjectiveKind kind, const FeatureMatrix& features) {
    return objective_eval(kind, features).value;
}

Matrix finite_diff_gradient(const std::function<double(const FeatureMatrix&)>& f,
                            const FeatureMatrix& features, double step) {
    if (step < 1e-8 || step > 1e-2) throw Error("finite-difference step must be in [1e-8, 1e-2]");
    Matrix work = features.data();
    Matrix grad(work.rows(), work.cols());
    for (std::size_t i = 0; i < work.rows(); ++i) {
        for (std::size_t j = 0; j < work.cols(); ++j) {
            const double orig = work(i, j);
            work(i, j) = orig + step;
            const double fp = f(FeatureMatrix(work));
            work(i, j) = orig - step;
            const double fm = f(FeatureMatrix(work));
            work(i, j) = orig;
            grad(i, j) = (fp - fm) / (2.0 * step);
        }
    }
    return grad;
}

Matrix finite_diff_gradient(ObjectiveKind kind, const FeatureMatrix& features, double step) {
    return finite_diff_gradient(
        [kind](const FeatureMatrix& m) { return objective_value(kind, m); }, features, step);
}

GradCheckReport compare_gradients(const Matrix& analytic, const Matrix& numeric,
                                  double threshold, double abs_floor) {
    if (!analytic.same_shape(numeric)) throw ShapeMismatch("gradient shapes differ");
    GradCheckReport rep;
    for (std::size_t i = 0; i < analytic.rows(); ++i) {
        for (std::size_t j = 0; j < analytic.cols(); ++j) {
            const double a = analytic(i, j);
            const double n = numeric(i, j);
            const double abs_err = std::abs(a - n);
            rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
            if (abs_err <= abs_floor) continue;  // near-zero error: absolute check only
            const double rel = abs_err / std::max(std::abs(a), std::abs(n));
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_row = i;
                rep.worst_col = j;
            }
        }
    }
    rep.passed = rep.max_rel_error <= threshold;
    return rep;
}

namespace {

double raw_cosine(std::span<const double> a, std::span<const double> b) {
    return dot(a, b) / (norm2(a) * norm2(b));
}

// Analytic d cos_ij / d e_i with the clamp treated as pass-through.
std::vector<double> cosine_grad_wrt_ei(std::span<const double> e_i, std::span<const double> e_j) {
    const double ni = norm2(e_i);
    const double nj = norm2(e_j);
    if (ni <= kRowNormFloor) throw ZeroNormRow(0);
    if (nj <= kRowNormFloor) throw ZeroNormRow(1);
    const double c = dot(e_i, e_j) / (ni * nj);
    std::vector<double> g(e_i.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = (e_j[k] / nj - c * e_i[k] / ni) / ni;
    return g;
}

}  // namespace

GradNormLawResult verify_cosine_gradnorm_law(std::span<const double> e_i,
                                             std::span<const double> e_j) {
    const auto g = cosine_grad_wrt_ei(e_i, e_j);
    const double c = raw_cosine(e_i, e_j);
    GradNormLawResult r;
    r.measured = norm2(g);
    r.predicted = std::sqrt(std::max(0.0, 1.0 - c * c)) / norm2(e_i);
    return r;
}

GradNormLawResult verify_angular_gradnorm_law(std::span<const double> e_i,
                                              std::span<const double> e_j) {
    const auto g = cosine_grad_wrt_ei(e_i, e_j);
    const double c = raw_cosine(e_i, e_j);
    if (std::abs(c) > 1.0 - kClampBandEps)
        throw ClampBand("pairwise cosine " + format_shortest(c) + " is inside the clamp band");
    const double sin_th = std::sqrt((1.0 - c) * (1.0 + c));
    GradNormLawResult r;
    r.measured = norm2(g) / sin_th;
    r.predicted = 1.0 / norm2(e_i);
    return r;
}

std::vector<GradNormCurveRow> gradnorm_curve(const std::vector<double>& angles_radians) {
    std::vector<GradNormCurveRow> rows;
    rows.reserve(angles_radians.size());
    for (double th : angles_radians) {
        const std::vector<double> a = {1.0, 0.0};
        const std::vector<double> b = {std::cos(th), std::sin(th)};
        GradNormCurveRow row;
        row.theta = th;
        row.cosine_gradnorm = verify_cosine_gradnorm_law(a, b).measured;
        row.angular_gradnorm = verify_angular_gradnorm_law(a, b).measured;
        rows.push_back(row);
    }
    return rows;
}

std::string gradnorm_curve_csv(const std::vector<GradNormCurveRow>& rows) {
    std::string out = "theta_radians,cosine_gradnorm,angular_gradnorm\n";
    for (const auto& r : rows) {
        out += format_fixed(r.theta, 6);
        out += ',';
        out += format_fixed(r.cosine_gradnorm, 6);
        out += ',';
        out += format_fixed(r.angular_gradnorm, 6);
        out += '\n';
    }
    return out;
}

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) m(i, j) = normal(rng);
    return m;
}

namespace {

// A matrix is skipped when any pair sits inside the clamp band, or (for the
// angular objective) when some row's two smallest angles are closer than the
// difference stencil can resolve without flipping the argmin.
bool differentiable_instance(const FeatureMatrix& features, double step) {
    const Matrix unit = normalize(features).data();
    const std::size_t n = unit.rows();
    Matrix theta(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        theta(i, i) = std::numeric_limits<double>::infinity();
        for (std::size_t j = i + 1; j < n; ++j) {
            const double c = dot(unit.row(i), unit.row(j));
            if (std::abs(c) > 1.0 - kClampBandEps) return false;
            theta(i, j) = theta(j, i) = std::acos(clamp_cosine(c));
        }
    }
    const double gap_floor = std::max(kTieTolerance, 10.0 * step);
    for (std::size_t i = 0; i < n; ++i) {
        double mn = std::numeric_limits<double>::infinity();
        double second = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (theta(i, j) < mn) {
                second = mn;
                mn = theta(i, j);
            } else {
                second = std::min(second, theta(i, j));
            }
        }
        if (second - mn < gap_floor) return false;
    }
    return true;
}

}  // namespace

GradCheckSuiteResult run_gradcheck_suite(const GradCheckSuiteConfig& cfg) {
    GradCheckSuiteResult result;
    result.passed = true;
    const ObjectiveKind kinds[] = {ObjectiveKind::AngularDiversity,
                                   ObjectiveKind::Orthogonality, ObjectiveKind::Atfd};
    std::uint64_t instance = 0;
    for (std::size_t nv : cfg.n_values) {
        for (std::size_t dv : cfg.d_values) {
            for (int s = 0; s < cfg.seeds; ++s, ++instance) {
                const FeatureMatrix features(
                    random_matrix(nv, dv, cfg.base_seed + instance));
                if (!differentiable_instance(features, cfg.step)) {
                    ++result.skipped;
                    continue;
                }
                for (ObjectiveKind kind : kinds) {
                    const ObjectiveEval eval = objective_eval(kind, features);
                    const Matrix numeric = finite_diff_gradient(kind, features, cfg.step);
                    const GradCheckReport rep =
                        compare_gradients(eval.grad, numeric, cfg.threshold, cfg.abs_floor);
                    ++result.checked;
                    if (rep.max_rel_error > result.worst.max_rel_error) {
                        result.worst = rep;
                        result.worst_objective = to_string(kind);
                    }
                    if (!rep.passed) result.passed = false;
                }
            }
        }
    }
    return result;
}

}  // namespace spherecal
