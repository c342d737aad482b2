#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spherecal/core.hpp"
#include "spherecal/objectives.hpp"

namespace spherecal {

enum class ObjectiveKind { AngularDiversity, Orthogonality, Atfd };

ObjectiveKind objective_from_string(const std::string& name);
std::string to_string(ObjectiveKind kind);

double objective_value(ObjectiveKind kind, const FeatureMatrix& features);
ObjectiveEval objective_eval(ObjectiveKind kind, const FeatureMatrix& features);

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
    bool passed = false;
};

// Central differences (f(E+h) - f(E-h)) / 2h entry by entry, through the
// same clamped evaluation path as the analytic gradient.
Matrix finite_diff_gradient(const std::function<double(const FeatureMatrix&)>& f,
                            const FeatureMatrix& features, double step = 1e-5);
Matrix finite_diff_gradient(ObjectiveKind kind, const FeatureMatrix& features,
                            double step = 1e-5);

// Entries whose numeric and analytic magnitudes both sit under abs_floor are
// compared absolutely, everything else relatively.
GradCheckReport compare_gradients(const Matrix& analytic, const Matrix& numeric,
                                  double threshold = 1e-4, double abs_floor = 1e-7);

struct GradNormLawResult {
    double measured = 0.0;
    double predicted = 0.0;
};

// || d cos(theta_ij) / d e_i || against |sin theta_ij| / ||e_i||.
GradNormLawResult verify_cosine_gradnorm_law(std::span<const double> e_i,
                                             std::span<const double> e_j);

// || d theta_ij / d e_i || against 1 / ||e_i||. Throws ClampBand when
// |cos| > 1 - kClampBandEps, where clamping breaks the law.
GradNormLawResult verify_angular_gradnorm_law(std::span<const double> e_i,
                                              std::span<const double> e_j);

struct GradNormCurveRow {
    double theta = 0.0;
    double cosine_gradnorm = 0.0;
    double angular_gradnorm = 0.0;
};

// Measured gradient norms for unit-vector pairs at the given angles.
std::vector<GradNormCurveRow> gradnorm_curve(const std::vector<double>& angles_radians);
std::string gradnorm_curve_csv(const std::vector<GradNormCurveRow>& rows);

struct GradCheckSuiteConfig {
    int seeds = 50;
    std::vector<std::size_t> n_values = {3, 8, 20};
    std::vector<std::size_t> d_values = {2, 16, 64};
    double step = 1e-5;
    double threshold = 1e-4;
    double abs_floor = 1e-7;
    std::uint64_t base_seed = 0;
};

struct GradCheckSuiteResult {
    GradCheckReport worst;  // across all checked instances and objectives
    std::string worst_objective;
    int checked = 0;
    int skipped = 0;  // instances at nondifferentiable points (clamp band / ties)
    bool passed = false;
};

// Analytic vs finite-difference agreement for all three objectives over the
// random instance grid. Instances with a pair inside the clamp band, or an
// argmin gap too small for the difference stencil, are skipped and counted.
GradCheckSuiteResult run_gradcheck_suite(const GradCheckSuiteConfig& cfg = {});

// Seeded matrix with rows drawn from a standard normal, for the suite and
// for property tests.
Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace spherecal
