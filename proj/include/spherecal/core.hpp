#pragma once

#include <filesystem>
#include <vector>

#include "spherecal/errors.hpp"
#include "spherecal/matrix.hpp"

namespace spherecal {

// Rows at or below this L2 norm are rejected as degenerate.
inline constexpr double kRowNormFloor = 1e-12;

// Off-diagonal cosines live in [-1+eps, 1-eps] so arccos derivatives stay
// finite; at the clamp boundary 1/sqrt(1-c^2) is about 2.2e3.
inline constexpr double kCosineClampEps = 1e-7;

// Wider band around +-1 where clamping distorts the angular gradient law;
// pairs inside it are reported, never asserted on.
inline constexpr double kClampBandEps = 1e-6;

// N x D matrix of raw (unnormalized) class feature vectors. N >= 2 because
// every dispersion objective is pairwise.
class FeatureMatrix {
public:
    explicit FeatureMatrix(Matrix data);

    const Matrix& data() const noexcept { return data_; }
    std::size_t n_classes() const noexcept { return data_.rows(); }
    std::size_t dim() const noexcept { return data_.cols(); }

private:
    Matrix data_;
};

// Row-wise L2-normalized view of a FeatureMatrix; every row has unit norm
// within 1e-12.
class NormalizedFeatureMatrix {
public:
    explicit NormalizedFeatureMatrix(Matrix data);

    const Matrix& data() const noexcept { return data_; }
    std::size_t n_classes() const noexcept { return data_.rows(); }
    std::size_t dim() const noexcept { return data_.cols(); }

private:
    Matrix data_;
};

// Symmetric N x N pairwise cosine matrix, diagonal exactly 1, off-diagonal
// clamped to [-1+kCosineClampEps, 1-kCosineClampEps].
class CosineMatrix {
public:
    explicit CosineMatrix(Matrix data);

    const Matrix& data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.rows(); }

private:
    Matrix data_;
};

// Symmetric N x N matrix of pairwise angles in radians, diagonal exactly 0.
class AngleMatrix {
public:
    explicit AngleMatrix(Matrix data);

    const Matrix& data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.rows(); }

private:
    Matrix data_;
};

NormalizedFeatureMatrix normalize(const FeatureMatrix& features);
CosineMatrix cosine_matrix(const NormalizedFeatureMatrix& nf);
AngleMatrix angle_matrix(const CosineMatrix& cos);

double clamp_cosine(double c);

// Smallest pairwise angle (radians) over all row pairs.
double min_pairwise_angle(const FeatureMatrix& features);

// CSV round trip: one row per class, comma-separated, no header. Values are
// written in shortest round-trip form, so load(save(m)) == m exactly.
FeatureMatrix load_feature_csv(const std::filesystem::path& path);
void save_feature_csv(const FeatureMatrix& features, const std::filesystem::path& path);

}  // namespace spherecal
