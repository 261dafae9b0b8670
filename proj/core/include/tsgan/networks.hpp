#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsgan/imageops.hpp"
#include "tsgan/ops.hpp"
#include "tsgan/param_store.hpp"

namespace tsgan {

/// Where the outline map enters the decoder.
enum class OutlineInjection {
    deepest,     ///< concatenated to the encoder features only
    all_levels,  ///< also after every transposed convolution
};

/// Widths and wiring of encoder, decoder and discriminator.
struct NetworkConfig {
    std::vector<int> encoder_widths{32, 32, 64, 64, 128, 128, 256, 256};
    std::vector<int> pool_after{2, 4, 6, 8};  // 1-based conv indices followed by a 2x2/2 max pool
    int encoder_kernel = 3;

    int decoder_channels = 256;
    std::vector<int> dilations{1, 1, 2, 2, 4, 4, 2, 1};
    std::vector<int> deconv_widths{128, 64, 32, 32};
    int deconv_kernel = 4;

    // Layers 1..7; layer 8 is the single-channel head. Stride 2 at 1, 3, 5, 7.
    std::vector<int> disc_widths{32, 32, 64, 64, 128, 128, 256};
    double disc_leaky_slope = 0.2;

    OutlineInjection injection = OutlineInjection::deepest;
    bool use_outline = true;  // false feeds an all-zero outline (ablation)
    bool two_stage = true;    // false uses the stage-1 map as the final prediction
    double sigma = 2.0;       // LoG scale
    int log_radius = 0;       // 0 = ceil(3 sigma)

    void validate() const;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

constexpr int kEncoderLayers = 8;
constexpr int kResidualBlocks = 8;
constexpr int kDeconvLayers = 4;
constexpr int kDiscLayers = 8;
constexpr std::int64_t kDownsampleFactor = 16;

/// Spatial extents of the decoder's five resolutions, coarsest first:
/// (h/16, w/16), (h/8, w/8), (h/4, w/4), (h/2, w/2), (h, w).
std::vector<std::pair<std::int64_t, std::int64_t>> decoder_level_dims(std::int64_t h, std::int64_t w);

enum class DiscMode { critic, probability };

/// Parameters plus batch-norm running moments. Running moments are kept per
/// stage (`stage1.decoder.block3.bn1`, `stage2...`) because the two stages see
/// different activation statistics; gamma/beta themselves are shared.
template <typename T>
struct TwoStageModel {
    NetworkConfig config;
    ParamStore<T> params;
    std::map<std::string, RunningMoments<T>> norm_state;
    BatchNormOptions norm_options;
};

/// Allocates every parameter with He-normal weights and zero biases (batch
/// norm: gamma 1, beta 0). Stage-2 encoder/decoder names alias stage 1 except
/// `stage2.encoder.layer1.*`, whose input has the extra coarse-map channel.
template <typename T>
ParamStore<T> build_params(const NetworkConfig& config, std::uint64_t seed);

template <typename T>
TwoStageModel<T> build_model(const NetworkConfig& config, std::uint64_t seed);

/// Outline levels for the decoder, converted to T. All-zero when the config
/// disables the outline.
template <typename T>
std::vector<Tensor<T>> outline_levels(const NetworkConfig& config, const imageops::Image& image);

template <typename T>
Tensor<T> encoder_forward(const TwoStageModel<T>& model, int stage, const Tensor<T>& input);

template <typename T>
Tensor<T> residual_block_forward(TwoStageModel<T>& model, int stage, int block, const Tensor<T>& input,
                                 NormMode mode);

template <typename T>
Tensor<T> decoder_forward(TwoStageModel<T>& model, int stage, const Tensor<T>& features,
                          const std::vector<Tensor<T>>& outline, NormMode mode);

template <typename T>
Tensor<T> discriminator_forward(const ParamStore<T>& params, const Tensor<T>& map, DiscMode mode,
                                double leaky_slope = 0.2);

template <typename T>
struct StageOutputs {
    Tensor<T> coarse;
    Tensor<T> fine;  // undefined when the model is single-stage

    [[nodiscard]] const Tensor<T>& final_map() const { return fine.defined() ? fine : coarse; }
};

/// Both stages on a batch; stage 2 sees image ⊕ coarse.
template <typename T>
StageOutputs<T> generate(TwoStageModel<T>& model, const Tensor<T>& image, const std::vector<Tensor<T>>& outline,
                         NormMode mode);

/// Eval-mode, gradient-free prediction on a (n,3,h,w) image with h, w
/// divisible by 16. Uses the model's LoG sigma.
template <typename T>
StageOutputs<T> predict(TwoStageModel<T>& model, const imageops::Image& image);

}  // namespace tsgan
