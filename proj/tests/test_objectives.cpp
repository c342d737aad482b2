#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "spherecal/gradcheck.hpp"
#include "spherecal/objectives.hpp"

using namespace spherecal;

namespace {

const double kPi = std::acos(-1.0);

Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], j);
    return out;
}

}  // namespace

TEST_CASE("angular diversity on canonical pairs") {
    FeatureMatrix anti(Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}}));
    const ObjectiveEval e = angular_diversity(anti);
    CHECK(std::abs(-e.value - kPi) < 5e-4);

    FeatureMatrix tri(Matrix::from_rows({{1.0, 0.0},
                                         {-0.5, std::sqrt(3.0) / 2.0},
                                         {-0.5, -std::sqrt(3.0) / 2.0}}));
    const ObjectiveEval et = angular_diversity(tri);
    CHECK(std::abs(-et.value - 2.0 * kPi / 3.0) < 1e-9);

    FeatureMatrix coin(Matrix::from_rows({{1.0, 0.0}, {1.0, 0.0}}));
    CHECK(std::abs(-angular_diversity(coin).value) < 5e-4);
}

TEST_CASE("orthogonality loss on canonical configurations") {
    FeatureMatrix orth(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
    CHECK(orthogonality_loss(orth).value == 0.0);

    FeatureMatrix coin(Matrix::from_rows({{1.0, 0.0}, {1.0, 0.0}}));
    CHECK(std::abs(orthogonality_loss(coin).value - 1.0) < 1e-6);

    // three unit vectors at mutual 60 degrees in 3-D
    const double s3 = std::sqrt(3.0), s6 = std::sqrt(6.0);
    FeatureMatrix sixty(Matrix::from_rows(
        {{1.0, 0.0, 0.0}, {0.5, s3 / 2.0, 0.0}, {0.5, s3 / 6.0, s6 / 3.0}}));
    CHECK(std::abs(orthogonality_loss(sixty).value - 0.25) < 1e-9);
}

TEST_CASE("atfd loss on canonical configurations") {
    FeatureMatrix anti(Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}}));
    CHECK(atfd_loss(anti).value == doctest::Approx(-1.0).epsilon(1e-15));

    FeatureMatrix same(Matrix::from_rows({{2.0, 0.0}, {2.0, 0.0}, {2.0, 0.0}}));
    CHECK(atfd_loss(same).value == 0.0);

    FeatureMatrix orth(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
    CHECK(std::abs(atfd_loss(orth).value - (-std::sqrt(2.0) / 2.0)) < 1e-12);
}

TEST_CASE("tpt loss values") {
    Matrix uniform(1, 4, 0.25);
    CHECK(std::abs(tpt_loss(uniform).value - std::log(4.0)) < 1e-12);

    Matrix half = Matrix::from_rows({{0.5, 0.3, 0.2}});
    CHECK(std::abs(tpt_loss(half).value - std::log(2.0)) < 1e-12);

    Matrix confident = Matrix::from_rows({{1.0 - 1e-9, 0.5e-9, 0.5e-9}});
    CHECK(tpt_loss(confident).value == doctest::Approx(1e-9).epsilon(1e-3));

    // entropy mode: uniform gives log K, gradient is zero by symmetry
    const TptEval ent = tpt_loss(uniform, TptMode::Entropy);
    CHECK(std::abs(ent.value - std::log(4.0)) < 1e-12);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(ent.grad_logits(0, k)) < 1e-12);
}

TEST_CASE("tpt loss rejects degenerate batches") {
    Matrix not_normalized = Matrix::from_rows({{0.5, 0.4}});
    CHECK_THROWS_AS(tpt_loss(not_normalized), DegenerateProbability);
    Matrix negative = Matrix::from_rows({{1.2, -0.2}});
    CHECK_THROWS_AS(tpt_loss(negative), DegenerateProbability);
}

TEST_CASE("tpt gradient matches the softmax jacobian restricted to the argmax") {
    Matrix probs = Matrix::from_rows({{0.7, 0.2, 0.1}});
    const TptEval e = tpt_loss(probs);
    CHECK(e.grad_logits(0, 0) == doctest::Approx(0.7 - 1.0).epsilon(1e-15));
    CHECK(e.grad_logits(0, 1) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(e.grad_logits(0, 2) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("combined loss with lambda 0 equals the tpt term") {
    FeatureMatrix m(random_matrix(4, 3, 7));
    Matrix probs = Matrix::from_rows({{0.5, 0.25, 0.25}});
    CombinedLossConfig cfg;
    cfg.lambda = 0.0;
    const CombinedEval e = combined_loss(m, probs, cfg);
    CHECK(e.value == tpt_loss(probs).value);
    for (std::size_t i = 0; i < e.grad.rows(); ++i)
        for (std::size_t j = 0; j < e.grad.cols(); ++j) CHECK(e.grad(i, j) == 0.0);
}

TEST_CASE("combined loss: perfect confidence plus AD on an antipodal pair") {
    FeatureMatrix anti(Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}}));
    Matrix perfect = Matrix::from_rows({{1.0, 0.0}});
    CombinedLossConfig cfg;  // lambda defaults to 80
    CHECK(cfg.lambda == 80.0);
    const CombinedEval e = combined_loss(anti, perfect, cfg);
    CHECK(e.tpt_term == 0.0);
    CHECK(std::abs(e.value - (-80.0 * kPi)) < 5e-2);
}

TEST_CASE("permutation invariance of every objective") {
    const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix m = random_matrix(5, 4, seed);
        const Matrix pm = permute_rows(m, perm);
        for (ObjectiveKind kind : {ObjectiveKind::AngularDiversity, ObjectiveKind::Orthogonality,
                                   ObjectiveKind::Atfd}) {
            const ObjectiveEval a = objective_eval(kind, FeatureMatrix(m));
            const ObjectiveEval b = objective_eval(kind, FeatureMatrix(pm));
            CHECK(std::abs(a.value - b.value) < 1e-10);
            // grad rows permute with the inputs
            for (std::size_t i = 0; i < 5; ++i)
                for (std::size_t j = 0; j < 4; ++j)
                    CHECK(std::abs(b.grad(i, j) - a.grad(perm[i], j)) < 1e-10);
        }
    }
}

TEST_CASE("AD value ignores row scale; its gradient scales inversely") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Matrix m = random_matrix(5, 3, seed);
        const ObjectiveEval a = angular_diversity(FeatureMatrix(m));
        const double alpha = 2.5;
        Matrix scaled = m;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) scaled(i, j) *= alpha;
        const ObjectiveEval b = angular_diversity(FeatureMatrix(scaled));
        CHECK(std::abs(a.value - b.value) < 1e-9);
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                CHECK(b.grad(i, j) * alpha == doctest::Approx(a.grad(i, j)).epsilon(1e-9));
    }
}

TEST_CASE("AD stays within [0, pi] on random instances") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const double ad = -angular_diversity(FeatureMatrix(random_matrix(6, 3, seed))).value;
        CHECK(ad >= 0.0);
        CHECK(ad <= kPi);
    }
}

TEST_CASE("orthogonality loss is zero exactly for pairwise-orthogonal rows") {
    Matrix eye(4, 6);
    for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 2.0;  // scale must not matter
    CHECK(orthogonality_loss(FeatureMatrix(eye)).value == 0.0);
    Matrix tilted = eye;
    tilted(0, 1) = 0.5;
    CHECK(orthogonality_loss(FeatureMatrix(tilted)).value > 1e-4);
}

TEST_CASE("a small step along the negative gradient does not increase the loss") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix m = random_matrix(6, 4, seed + 100);
        for (ObjectiveKind kind : {ObjectiveKind::AngularDiversity, ObjectiveKind::Orthogonality,
                                   ObjectiveKind::Atfd}) {
            const ObjectiveEval e = objective_eval(kind, FeatureMatrix(m));
            double gnorm2 = 0.0;
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) gnorm2 += e.grad(i, j) * e.grad(i, j);
            if (gnorm2 < 1e-20) continue;  // stationary instance
            const double h = 1e-6 / std::sqrt(gnorm2);
            Matrix stepped = m;
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) stepped(i, j) -= h * e.grad(i, j);
            const double f1 = objective_value(kind, FeatureMatrix(stepped));
            CHECK(f1 <= e.value + 1e-9);
        }
    }
}

TEST_CASE("softmax head produces a probability row and a consistent chain") {
    FeatureMatrix m(random_matrix(5, 3, 11));
    const SoftmaxHead head({0.3, -0.2, 0.9}, 0.5);
    const Matrix p = head.probabilities(m);
    REQUIRE(p.rows() == 1);
    REQUIRE(p.cols() == 5);
    double sum = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(p(0, k) > 0.0);
        sum += p(0, k);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("smooth-min variant approaches the hard minimum as beta grows") {
    const Matrix m = random_matrix(5, 3, 3);
    const double hard = angular_diversity(FeatureMatrix(m)).value;
    AngularDiversityOptions opts;
    opts.smooth_min = true;
    opts.beta = 5000.0;
    const double soft = angular_diversity(FeatureMatrix(m), opts).value;
    CHECK(std::abs(hard - soft) < 1e-2);
    CHECK(soft >= hard - 1e-12);  // log-sum-exp soft min underestimates the min
}
