#pragma once

#include <vector>

#include "tsgan/tensor.hpp"

namespace tsgan {

struct Conv2dOptions {
    int stride = 1;
    int padding = 0;
    int dilation = 1;
};

/// Spatial output extent of a convolution along one axis.
std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, int stride, int padding, int dilation);

/// Cross-correlation. `weight` is (outC, inC, kH, kW); `bias` holds outC
/// values (any 4-D layout) or is undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dOptions opt = {});

/// Transposed convolution (adjoint of conv2d w.r.t. its input). `weight` is
/// (inC, outC, kH, kW); output extent (in-1)*stride - 2*padding + k.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding);

/// Max pooling; gradient goes to the first row-major argmax of each window.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, int kernel, int stride);

enum class NormMode { train, eval };

template <typename T>
struct RunningMoments {
    std::vector<T> mean;
    std::vector<T> var;

    RunningMoments() = default;
    explicit RunningMoments(std::size_t channels) : mean(channels, T(0)), var(channels, T(1)) {}
};

struct BatchNormOptions {
    double eps = 1e-5;
    double momentum = 0.1;
};

/// Per-channel batch normalization. Train mode normalizes with the biased
/// batch variance and folds the unbiased variance into `state`; eval mode
/// uses `state` only. `gamma`/`beta` hold C values each.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      RunningMoments<T>& state, NormMode mode, BatchNormOptions opt = {});

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T>
Tensor<T> square(const Tensor<T>& x);
/// Mean over every element; result is (1,1,1,1).
template <typename T>
Tensor<T> mean(const Tensor<T>& x);
/// Sum over every element; result is (1,1,1,1).
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);

}  // namespace tsgan
