#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "tsgan/tensor.hpp"

namespace tsgan {

enum class GanMode { wgan_clip, standard };

GanMode parse_gan_mode(const std::string& name);
std::string to_string(GanMode mode);

struct LossWeights {
    double lambda1 = 0.1;  // stage-1 pixel loss
    double lambda2 = 1.0;  // stage-1 adversarial
    double lambda3 = 0.1;  // stage-2 pixel loss
    double lambda4 = 1.0;  // stage-2 adversarial
    double lambda5 = 0.1;  // total variation on the final map
    double alpha = 1.0;    // TV exponent is 1/alpha
    GanMode gan_mode = GanMode::wgan_clip;

    void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// Scalar values of one training step, in double precision.
struct LossReport {
    double l1 = 0, l2_g = 0, l3 = 0, l4_g = 0, tv = 0, total = 0, d_loss = 0;
};

/// sum((pred - truth)^2) / (2 * C * H * W), averaged over the batch.
template <typename T>
Tensor<T> l2_pixel_loss(const Tensor<T>& pred, const Tensor<T>& truth);

template <typename T>
struct AdversarialLosses {
    Tensor<T> g_loss;
    Tensor<T> d_loss;
};

/// Scores are discriminator outputs of equal shape. In standard mode they must
/// be probabilities (sigmoid head).
template <typename T>
AdversarialLosses<T> adversarial_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake, GanMode mode);

/// Per pixel (dx^2 + dy^2)^(1/alpha) with forward differences; a difference
/// that would leave the map contributes 0. Summed per image, batch-averaged.
template <typename T>
Tensor<T> tv_loss(const Tensor<T>& map, double alpha);

/// The five generator terms. An undefined tensor counts as 0 and must carry a
/// zero weight.
template <typename T>
struct LossTerms {
    Tensor<T> l1, l2_g, l3, l4_g, tv;
};

template <typename T>
struct WeightedLoss {
    Tensor<T> total;
    LossReport report;  // total recomputed in double from the term values
};

/// Weighted sum of the terms. Throws ValueError naming the first non-finite term.
template <typename T>
WeightedLoss<T> total_loss(const LossTerms<T>& terms, const LossWeights& weights);

}  // namespace tsgan
