#pragma once

#include <string>
#include <vector>

#include "spherecal/core.hpp"
#include "spherecal/matrix.hpp"

namespace spherecal {

// Angles closer than this are treated as tied when selecting each row's
// nearest partner.
inline constexpr double kTieTolerance = 1e-10;

// Probabilities are floored here before any log.
inline constexpr double kProbFloor = 1e-30;

// Loss value plus its gradient with respect to the raw (pre-normalization)
// feature matrix.
struct ObjectiveEval {
    double value = 0.0;
    Matrix grad;
};

enum class Regularizer { None, Atfd, Orthogonality, AngularDiversity };
enum class TptMode { MaxLogProb, Entropy };

Regularizer regularizer_from_string(const std::string& name);
std::string to_string(Regularizer reg);
TptMode tpt_mode_from_string(const std::string& name);
std::string to_string(TptMode mode);

struct AngularDiversityOptions {
    bool smooth_min = false;  // log-sum-exp soft minimum instead of the hard min
    double beta = 50.0;       // soft-min sharpness; larger is closer to the hard min
};

// Negated mean minimum pairwise angle. The gradient flows only through each
// row's nearest partner; exact ties split the contribution evenly.
ObjectiveEval angular_diversity(const FeatureMatrix& features,
                                const AngularDiversityOptions& opts = {});

// Mean squared off-diagonal cosine; zero iff all pairs are orthogonal.
ObjectiveEval orthogonality_loss(const FeatureMatrix& features);

// Negated mean distance of the normalized rows from their centroid.
ObjectiveEval atfd_loss(const FeatureMatrix& features);

// Confidence loss over a batch of probability rows; gradient is with respect
// to the logits that produced each row through a softmax.
struct TptEval {
    double value = 0.0;
    Matrix grad_logits;  // same shape as the probability batch
};

TptEval tpt_loss(const Matrix& probabilities, TptMode mode = TptMode::MaxLogProb);

struct CombinedLossConfig {
    double lambda = 80.0;
    double temperature = 0.01;
    Regularizer regularizer = Regularizer::AngularDiversity;
    TptMode tpt_mode = TptMode::MaxLogProb;
    AngularDiversityOptions ad;

    void validate() const;
};

// Zero-shot softmax head for one test image: logits are the cosines between
// the normalized features and the image vector, scaled by 1/temperature.
class SoftmaxHead {
public:
    SoftmaxHead(std::vector<double> image_feature, double temperature);

    const std::vector<double>& image_feature() const noexcept { return image_; }
    double temperature() const noexcept { return tau_; }

    // 1 x N row of class probabilities.
    Matrix probabilities(const FeatureMatrix& features) const;

    // Chains a gradient w.r.t. the scaled logits back to the raw features.
    Matrix backprop_to_features(const FeatureMatrix& features, const Matrix& grad_logits) const;

private:
    std::vector<double> image_;
    double tau_;
};

struct CombinedEval {
    double value = 0.0;
    double tpt_term = 0.0;
    double reg_term = 0.0;  // regularizer loss before the lambda weight
    Matrix grad;
};

// Probabilities fixed by the caller: they contribute to the value only, the
// gradient is lambda times the regularizer gradient. An empty (0x0)
// probability matrix ablates the confidence term entirely.
CombinedEval combined_loss(const FeatureMatrix& features, const Matrix& probabilities,
                           const CombinedLossConfig& cfg);

// Probabilities produced from the features by the head: full chain rule.
CombinedEval combined_loss(const FeatureMatrix& features, const SoftmaxHead& head,
                           const CombinedLossConfig& cfg);

// Dispatches to the configured regularizer; None gives value 0 and zero grad.
ObjectiveEval regularizer_loss(const FeatureMatrix& features, Regularizer reg,
                               const AngularDiversityOptions& ad = {});

}  // namespace spherecal
