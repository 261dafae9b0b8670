#include "tsgan/networks.hpp"

#include <algorithm>
#include <cmath>

#include "tsgan/rng.hpp"

namespace tsgan {

namespace {

std::string stage_prefix(int stage) { return "stage" + std::to_string(stage); }

void check_stage(int stage) {
    if (stage != 1 && stage != 2) throw ValueError("stage must be 1 or 2, got " + std::to_string(stage));
}

template <typename T>
Tensor<T> he_normal(Shape shape, double fan_in, SplitMix64& rng, double gain = 1.0) {
    std::vector<T> v(static_cast<std::size_t>(shape.numel()));
    const double stddev = gain * std::sqrt(2.0 / fan_in);
    for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
    return Tensor<T>::from_data(shape, std::move(v), true);
}

template <typename T>
void add_conv(ParamStore<T>& store, const std::string& name, int in, int out, int k, SplitMix64& rng,
              bool bias = true, double gain = 1.0) {
    store.add(name + ".weight", he_normal<T>({out, in, k, k}, static_cast<double>(in) * k * k, rng, gain));
    if (bias) store.add(name + ".bias", Tensor<T>::zeros({out, 1, 1, 1}, true));
}

template <typename T>
void add_deconv(ParamStore<T>& store, const std::string& name, int in, int out, int k, SplitMix64& rng) {
    // Each output pixel of a stride-2 transposed conv sees in * (k/2)^2 taps.
    const double fan_in = static_cast<double>(in) * k * k / 4.0;
    store.add(name + ".weight", he_normal<T>({in, out, k, k}, fan_in, rng));
    store.add(name + ".bias", Tensor<T>::zeros({out, 1, 1, 1}, true));
}

template <typename T>
void add_norm(ParamStore<T>& store, const std::string& name, int channels) {
    store.add(name + ".weight", Tensor<T>::full({channels, 1, 1, 1}, T(1), true));
    store.add(name + ".bias", Tensor<T>::zeros({channels, 1, 1, 1}, true));
}

// Decoder parameter names relative to "stageK.decoder.".
std::vector<std::string> decoder_param_names() {
    std::vector<std::string> names{"input.weight", "input.bias"};
    for (int b = 1; b <= kResidualBlocks; ++b) {
        const std::string blk = "block" + std::to_string(b);
        for (const char* part : {".conv1.weight", ".bn1.weight", ".bn1.bias", ".conv2.weight", ".bn2.weight", ".bn2.bias"})
            names.push_back(blk + part);
    }
    for (int d = 1; d <= kDeconvLayers; ++d) {
        names.push_back("deconv" + std::to_string(d) + ".weight");
        names.push_back("deconv" + std::to_string(d) + ".bias");
    }
    names.push_back("head.weight");
    names.push_back("head.bias");
    return names;
}

template <typename T>
Tensor<T> conv_layer(const ParamStore<T>& p, const std::string& name, const Tensor<T>& x, Conv2dOptions opt) {
    const std::string bias = name + ".bias";
    return conv2d(x, p.get(name + ".weight"), p.contains(bias) ? p.get(bias) : Tensor<T>{}, opt);
}

void check_multiple_of_16(std::int64_t h, std::int64_t w, const char* what) {
    if (h % kDownsampleFactor != 0 || w % kDownsampleFactor != 0 || h < kDownsampleFactor || w < kDownsampleFactor)
        throw ShapeError(std::string(what) + ": image extent " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not a positive multiple of 16 (pad the image first)");
}

}  // namespace

void NetworkConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ValueError("invalid network config: " + msg); };
    if (encoder_widths.size() != kEncoderLayers) fail("encoder needs exactly 8 conv widths");
    if (pool_after.size() != 4) fail("encoder needs exactly 4 pool positions");
    for (std::size_t i = 0; i < pool_after.size(); ++i) {
        if (pool_after[i] < 1 || pool_after[i] > kEncoderLayers) fail("pool position out of range 1..8");
        if (i > 0 && pool_after[i] <= pool_after[i - 1]) fail("pool positions must be strictly increasing");
    }
    if (encoder_kernel < 1 || encoder_kernel % 2 == 0) fail("encoder kernel must be odd and positive");
    if (dilations.size() != kResidualBlocks) fail("decoder needs exactly 8 dilation rates");
    for (int d : dilations)
        if (d < 1) fail("dilation rates must be >= 1");
    if (deconv_widths.size() != kDeconvLayers) fail("decoder needs exactly 4 deconv widths");
    if (deconv_kernel < 2 || deconv_kernel % 2 != 0) fail("deconv kernel must be even (stride-2 exact doubling)");
    if (disc_widths.size() != kDiscLayers - 1) fail("discriminator needs 7 widths (layer 8 is the 1-channel head)");
    auto positive = [&](const std::vector<int>& v, const char* what) {
        for (int x : v)
            if (x < 1) fail(std::string(what) + " widths must be >= 1");
    };
    positive(encoder_widths, "encoder");
    positive(deconv_widths, "deconv");
    positive(disc_widths, "discriminator");
    if (decoder_channels < 1) fail("decoder channels must be >= 1");
    if (!(sigma > 0)) fail("sigma must be > 0");
    if (disc_leaky_slope < 0 || disc_leaky_slope >= 1) fail("leaky slope must be in [0,1)");
    if (log_radius < 0) fail("log_radius must be >= 0");
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
    j = nlohmann::json{{"encoder_widths", c.encoder_widths},
                       {"pool_after", c.pool_after},
                       {"encoder_kernel", c.encoder_kernel},
                       {"decoder_channels", c.decoder_channels},
                       {"dilations", c.dilations},
                       {"deconv_widths", c.deconv_widths},
                       {"deconv_kernel", c.deconv_kernel},
                       {"disc_widths", c.disc_widths},
                       {"disc_leaky_slope", c.disc_leaky_slope},
                       {"injection", c.injection == OutlineInjection::deepest ? "deepest" : "all_levels"},
                       {"use_outline", c.use_outline},
                       {"two_stage", c.two_stage},
                       {"sigma", c.sigma},
                       {"log_radius", c.log_radius}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
    const NetworkConfig d;
    c.encoder_widths = j.value("encoder_widths", d.encoder_widths);
    c.pool_after = j.value("pool_after", d.pool_after);
    c.encoder_kernel = j.value("encoder_kernel", d.encoder_kernel);
    c.decoder_channels = j.value("decoder_channels", d.decoder_channels);
    c.dilations = j.value("dilations", d.dilations);
    c.deconv_widths = j.value("deconv_widths", d.deconv_widths);
    c.deconv_kernel = j.value("deconv_kernel", d.deconv_kernel);
    c.disc_widths = j.value("disc_widths", d.disc_widths);
    c.disc_leaky_slope = j.value("disc_leaky_slope", d.disc_leaky_slope);
    const std::string inj = j.value("injection", std::string("deepest"));
    if (inj == "deepest") {
        c.injection = OutlineInjection::deepest;
    } else if (inj == "all_levels") {
        c.injection = OutlineInjection::all_levels;
    } else {
        throw ValueError("unknown outline injection '" + inj + "' (expected deepest or all_levels)");
    }
    c.use_outline = j.value("use_outline", d.use_outline);
    c.two_stage = j.value("two_stage", d.two_stage);
    c.sigma = j.value("sigma", d.sigma);
    c.log_radius = j.value("log_radius", d.log_radius);
}

std::vector<std::pair<std::int64_t, std::int64_t>> decoder_level_dims(std::int64_t h, std::int64_t w) {
    check_multiple_of_16(h, w, "decoder_level_dims");
    std::vector<std::pair<std::int64_t, std::int64_t>> dims;
    for (std::int64_t f = kDownsampleFactor; f >= 1; f /= 2) dims.emplace_back(h / f, w / f);
    return dims;
}

template <typename T>
ParamStore<T> build_params(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    SplitMix64 rng(seed);
    ParamStore<T> store;
    const int k = config.encoder_kernel;

    // Stage 1 owns every generator parameter.
    int in = 3;
    for (int l = 1; l <= kEncoderLayers; ++l) {
        const int out = config.encoder_widths[static_cast<std::size_t>(l - 1)];
        add_conv(store, "stage1.encoder.layer" + std::to_string(l), in, out, k, rng);
        in = out;
    }
    const int C = config.decoder_channels;
    add_conv(store, "stage1.decoder.input", config.encoder_widths.back() + 1, C, 3, rng);
    for (int b = 1; b <= kResidualBlocks; ++b) {
        const std::string blk = "stage1.decoder.block" + std::to_string(b);
        add_conv(store, blk + ".conv1", C, C, 3, rng, false);
        add_norm(store, blk + ".bn1", C);
        add_conv(store, blk + ".conv2", C, C, 3, rng, false);
        add_norm(store, blk + ".bn2", C);
    }
    const int extra = config.injection == OutlineInjection::all_levels ? 1 : 0;
    in = C;
    for (int d = 1; d <= kDeconvLayers; ++d) {
        const int out = config.deconv_widths[static_cast<std::size_t>(d - 1)];
        add_deconv(store, "stage1.decoder.deconv" + std::to_string(d), in + (d > 1 ? extra : 0), out,
                   config.deconv_kernel, rng);
        in = out;
    }
    // Small head so the initial maps sit near 0.5 instead of a saturated 0/1 pattern.
    add_conv(store, "stage1.decoder.head", in + extra, 1, 3, rng, true, 0.1);

    // Stage 2: its own first encoder layer (image ⊕ coarse map), everything else shared.
    add_conv(store, "stage2.encoder.layer1", 4, config.encoder_widths[0], k, rng);
    for (int l = 2; l <= kEncoderLayers; ++l) {
        for (const char* part : {".weight", ".bias"}) {
            const std::string suffix = ".encoder.layer" + std::to_string(l) + part;
            store.alias("stage2" + suffix, "stage1" + suffix);
        }
    }
    for (const auto& name : decoder_param_names()) store.alias("stage2.decoder." + name, "stage1.decoder." + name);

    // Discriminator, shared by both stages.
    in = 1;
    for (int l = 1; l <= kDiscLayers; ++l) {
        const int out = l < kDiscLayers ? config.disc_widths[static_cast<std::size_t>(l - 1)] : 1;
        add_conv(store, "disc.layer" + std::to_string(l), in, out, 3, rng);
        in = out;
    }
    return store;
}

template <typename T>
TwoStageModel<T> build_model(const NetworkConfig& config, std::uint64_t seed) {
    TwoStageModel<T> model{config, build_params<T>(config, seed), {}};
    for (int stage = 1; stage <= 2; ++stage)
        for (int b = 1; b <= kResidualBlocks; ++b)
            for (int n = 1; n <= 2; ++n)
                model.norm_state.emplace(
                    stage_prefix(stage) + ".decoder.block" + std::to_string(b) + ".bn" + std::to_string(n),
                    RunningMoments<T>(static_cast<std::size_t>(config.decoder_channels)));
    return model;
}

template <typename T>
std::vector<Tensor<T>> outline_levels(const NetworkConfig& config, const imageops::Image& image) {
    const Shape s = image.shape();
    const auto dims = decoder_level_dims(s.h, s.w);
    std::vector<Tensor<T>> levels;
    if (!config.use_outline) {
        for (const auto& [h, w] : dims) levels.push_back(Tensor<T>::zeros({s.n, 1, h, w}));
        return levels;
    }
    const auto pyramid = imageops::make_outline_pyramid(image, config.sigma, config.log_radius, dims);
    for (const auto& level : pyramid.levels) levels.push_back(level.template cast<T>());
    return levels;
}

template <typename T>
Tensor<T> encoder_forward(const TwoStageModel<T>& model, int stage, const Tensor<T>& input) {
    check_stage(stage);
    const std::int64_t want = stage == 1 ? 3 : 4;
    if (input.shape().c != want)
        throw ShapeError("stage-" + std::to_string(stage) + " encoder expects " + std::to_string(want) +
                         " input channels, got " + std::to_string(input.shape().c));
    const auto& cfg = model.config;
    const std::string prefix = stage_prefix(stage) + ".encoder.layer";
    Tensor<T> x = input;
    for (int l = 1; l <= kEncoderLayers; ++l) {
        x = relu(conv_layer(model.params, prefix + std::to_string(l), x, {.padding = cfg.encoder_kernel / 2}));
        if (std::find(cfg.pool_after.begin(), cfg.pool_after.end(), l) != cfg.pool_after.end()) x = maxpool2d(x, 2, 2);
    }
    return x;
}

template <typename T>
Tensor<T> residual_block_forward(TwoStageModel<T>& model, int stage, int block, const Tensor<T>& input,
                                 NormMode mode) {
    check_stage(stage);
    const int dil = model.config.dilations.at(static_cast<std::size_t>(block - 1));
    const std::string blk = ".decoder.block" + std::to_string(block);
    const std::string shared = "stage1" + blk;  // parameters are shared; stage picks running moments
    const std::string own = stage_prefix(stage) + blk;
    const auto& p = model.params;
    auto norm = [&](const Tensor<T>& x, const char* which) {
        return batchnorm2d(x, p.get(shared + which + ".weight"), p.get(shared + which + ".bias"),
                           model.norm_state.at(own + which), mode, model.norm_options);
    };
    Tensor<T> y = conv_layer(p, shared + ".conv1", input, {.padding = dil, .dilation = dil});
    y = relu(norm(y, ".bn1"));
    y = conv_layer(p, shared + ".conv2", y, {.padding = dil, .dilation = dil});
    y = norm(y, ".bn2");
    return relu(add(y, input));
}

template <typename T>
Tensor<T> decoder_forward(TwoStageModel<T>& model, int stage, const Tensor<T>& features,
                          const std::vector<Tensor<T>>& outline, NormMode mode) {
    check_stage(stage);
    const auto& cfg = model.config;
    const auto& p = model.params;
    const Shape fs = features.shape();
    if (outline.size() != kDeconvLayers + 1)
        throw ShapeError("decoder expects 5 outline levels, got " + std::to_string(outline.size()));
    auto check_level = [&](std::size_t k, const Shape& want) {
        const Shape& got = outline[k].shape();
        if (got.n != want.n || got.c != 1 || got.h != want.h || got.w != want.w)
            throw ShapeError("outline level " + std::to_string(k) + " has shape " + got.str() + ", decoder needs (" +
                             std::to_string(want.n) + ",1," + std::to_string(want.h) + "," + std::to_string(want.w) +
                             ")");
    };
    check_level(0, fs);

    const std::string prefix = stage_prefix(stage) + ".decoder.";
    Tensor<T> x = concat_channels<T>({features, outline[0]});
    x = relu(conv_layer(p, prefix + "input", x, {.padding = 1}));
    for (int b = 1; b <= kResidualBlocks; ++b) x = residual_block_forward(model, stage, b, x, mode);
    const int pad = (cfg.deconv_kernel - 2) / 2;
    for (int d = 1; d <= kDeconvLayers; ++d) {
        const std::string name = prefix + "deconv" + std::to_string(d);
        x = relu(conv_transpose2d(x, p.get(name + ".weight"), p.get(name + ".bias"), 2, pad));
        if (cfg.injection == OutlineInjection::all_levels) {
            check_level(static_cast<std::size_t>(d), x.shape());
            x = concat_channels<T>({x, outline[static_cast<std::size_t>(d)]});
        }
    }
    return sigmoid(conv_layer(p, prefix + "head", x, {.padding = 1}));
}

template <typename T>
Tensor<T> discriminator_forward(const ParamStore<T>& params, const Tensor<T>& map, DiscMode mode, double leaky_slope) {
    if (map.shape().c != 1)
        throw ShapeError("discriminator expects a single-channel map, got " + std::to_string(map.shape().c) +
                         " channels");
    Tensor<T> x = map;
    for (int l = 1; l <= kDiscLayers; ++l) {
        const int stride = (l % 2 == 1 && l < kDiscLayers) ? 2 : 1;
        x = conv_layer(params, "disc.layer" + std::to_string(l), x, {.stride = stride, .padding = 1});
        if (l < kDiscLayers) x = leaky_relu(x, static_cast<T>(leaky_slope));
    }
    return mode == DiscMode::probability ? sigmoid(x) : x;
}

template <typename T>
StageOutputs<T> generate(TwoStageModel<T>& model, const Tensor<T>& image, const std::vector<Tensor<T>>& outline,
                         NormMode mode) {
    check_multiple_of_16(image.shape().h, image.shape().w, "generate");
    StageOutputs<T> out;
    out.coarse = decoder_forward(model, 1, encoder_forward(model, 1, image), outline, mode);
    if (model.config.two_stage) {
        const Tensor<T> stitched = concat_channels<T>({image, out.coarse});
        out.fine = decoder_forward(model, 2, encoder_forward(model, 2, stitched), outline, mode);
    }
    return out;
}

template <typename T>
StageOutputs<T> predict(TwoStageModel<T>& model, const imageops::Image& image) {
    if (image.shape().c != 3) throw ShapeError("predict expects a 3-channel image, got " + image.shape().str());
    check_multiple_of_16(image.shape().h, image.shape().w, "predict");
    NoGradGuard no_grad;
    return generate(model, image.template cast<T>(), outline_levels<T>(model.config, image), NormMode::eval);
}

#define TSGAN_INSTANTIATE(T)                                                                                        \
    template ParamStore<T> build_params<T>(const NetworkConfig&, std::uint64_t);                                   \
    template TwoStageModel<T> build_model<T>(const NetworkConfig&, std::uint64_t);                                 \
    template std::vector<Tensor<T>> outline_levels<T>(const NetworkConfig&, const imageops::Image&);               \
    template Tensor<T> encoder_forward(const TwoStageModel<T>&, int, const Tensor<T>&);                            \
    template Tensor<T> residual_block_forward(TwoStageModel<T>&, int, int, const Tensor<T>&, NormMode);            \
    template Tensor<T> decoder_forward(TwoStageModel<T>&, int, const Tensor<T>&, const std::vector<Tensor<T>>&,    \
                                       NormMode);                                                                  \
    template Tensor<T> discriminator_forward(const ParamStore<T>&, const Tensor<T>&, DiscMode, double);            \
    template StageOutputs<T> generate(TwoStageModel<T>&, const Tensor<T>&, const std::vector<Tensor<T>>&, NormMode); \
    template StageOutputs<T> predict(TwoStageModel<T>&, const imageops::Image&);

TSGAN_INSTANTIATE(float)
TSGAN_INSTANTIATE(double)

#undef TSGAN_INSTANTIATE

}  // namespace tsgan
