#include "spherecal/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "spherecal/io.hpp"

namespace spherecal {

FeatureMatrix::FeatureMatrix(Matrix data) : data_(std::move(data)) {
    if (data_.rows() < 2) throw TooFewPoints(data_.rows());
    if (data_.cols() < 1) throw InvalidMatrix("feature matrix needs at least one column");
    if (!data_.all_finite()) throw InvalidMatrix("feature matrix has NaN or Inf entries");
}

NormalizedFeatureMatrix::NormalizedFeatureMatrix(Matrix data) : data_(std::move(data)) {
    if (data_.rows() < 2) throw TooFewPoints(data_.rows());
    if (!data_.all_finite()) throw InvalidMatrix("matrix has NaN or Inf entries");
    for (std::size_t i = 0; i < data_.rows(); ++i) {
        if (std::abs(norm2(data_.row(i)) - 1.0) > 1e-12)
            throw InvalidMatrix("row " + std::to_string(i) + " is not unit norm");
    }
}

CosineMatrix::CosineMatrix(Matrix data) : data_(std::move(data)) {
    if (data_.rows() != data_.cols()) throw InvalidMatrix("cosine matrix must be square");
    const std::size_t n = data_.rows();
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(data_(i, i) - 1.0) > 1e-12)
            throw InvalidMatrix("cosine diagonal must be 1");
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(data_(i, j) - data_(j, i)) > 1e-12)
                throw InvalidMatrix("cosine matrix must be symmetric");
            if (std::abs(data_(i, j)) > 1.0)
                throw InvalidMatrix("cosine entries must lie in [-1, 1]");
        }
    }
}

AngleMatrix::AngleMatrix(Matrix data) : data_(std::move(data)) {
    if (data_.rows() != data_.cols()) throw InvalidMatrix("angle matrix must be square");
    const std::size_t n = data_.rows();
    const double pi = std::acos(-1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (data_(i, i) != 0.0) throw InvalidMatrix("angle diagonal must be 0");
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(data_(i, j) - data_(j, i)) > 1e-10)
                throw InvalidMatrix("angle matrix must be symmetric");
            if (data_(i, j) < 0.0 || data_(i, j) > pi)
                throw InvalidMatrix("angle entries must lie in [0, pi]");
        }
    }
}

double clamp_cosine(double c) {
    return std::clamp(c, -1.0 + kCosineClampEps, 1.0 - kCosineClampEps);
}

NormalizedFeatureMatrix normalize(const FeatureMatrix& features) {
    const Matrix& e = features.data();
    Matrix out(e.rows(), e.cols());
    for (std::size_t i = 0; i < e.rows(); ++i) {
        const double n = norm2(e.row(i));
        if (n <= kRowNormFloor) throw ZeroNormRow(i);
        for (std::size_t j = 0; j < e.cols(); ++j) out(i, j) = e(i, j) / n;
    }
    return NormalizedFeatureMatrix(std::move(out));
}

CosineMatrix cosine_matrix(const NormalizedFeatureMatrix& nf) {
    const Matrix& u = nf.data();
    const std::size_t n = u.rows();
    Matrix c(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        c(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = clamp_cosine(dot(u.row(i), u.row(j)));
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return CosineMatrix(std::move(c));
}

AngleMatrix angle_matrix(const CosineMatrix& cos) {
    const Matrix& c = cos.data();
    const std::size_t n = c.rows();
    Matrix th(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        th(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = std::acos(c(i, j));
            th(i, j) = v;
            th(j, i) = v;
        }
    }
    return AngleMatrix(std::move(th));
}

double min_pairwise_angle(const FeatureMatrix& features) {
    const Matrix u = normalize(features).data();
    double best_cos = -1.0;  // largest cosine = smallest angle
    for (std::size_t i = 0; i < u.rows(); ++i)
        for (std::size_t j = i + 1; j < u.rows(); ++j)
            best_cos = std::max(best_cos, clamp_cosine(dot(u.row(i), u.row(j))));
    return std::acos(best_cos);
}

FeatureMatrix load_feature_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        for (const std::string& f : split_csv_line(line)) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size())
                throw ParseError("bad number '" + f + "'", line_no);
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("row has " + std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(rows.front().size()),
                             line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("empty feature file: " + path.string());
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return FeatureMatrix(std::move(m));
}

void save_feature_csv(const FeatureMatrix& features, const std::filesystem::path& path) {
    const Matrix& e = features.data();
    std::string out;
    for (std::size_t i = 0; i < e.rows(); ++i) {
        for (std::size_t j = 0; j < e.cols(); ++j) {
            if (j) out += ',';
            out += format_shortest(e(i, j));
        }
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace spherecal
