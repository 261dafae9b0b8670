#include <Eigen/Core>

#include "tsgan/ops.hpp"

namespace tsgan {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct Geometry {
    std::int64_t channels, height, width;  // image side
    std::int64_t kh, kw;
    int stride, pad, dil;
    std::int64_t out_h, out_w;  // column side

    [[nodiscard]] std::int64_t rows() const { return channels * kh * kw; }
    [[nodiscard]] std::int64_t cols() const { return out_h * out_w; }
};

// cols is (C*kh*kw) x (out_h*out_w), row-major.
template <typename T>
void im2col(const T* image, const Geometry& g, T* cols) {
    const std::int64_t plane = g.cols();
    for (std::int64_t c = 0; c < g.channels; ++c) {
        const T* src = image + c * g.height * g.width;
        for (std::int64_t ky = 0; ky < g.kh; ++ky) {
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
                T* dst = cols + ((c * g.kh + ky) * g.kw + kx) * plane;
                for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
                    const std::int64_t iy = oy * g.stride - g.pad + ky * g.dil;
                    T* row = dst + oy * g.out_w;
                    if (iy < 0 || iy >= g.height) {
                        std::fill(row, row + g.out_w, T(0));
                        continue;
                    }
                    const T* src_row = src + iy * g.width;
                    for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
                        const std::int64_t ix = ox * g.stride - g.pad + kx * g.dil;
                        row[ox] = (ix >= 0 && ix < g.width) ? src_row[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add of columns back onto the image (adjoint of im2col).
template <typename T>
void col2im_add(const T* cols, const Geometry& g, T* image) {
    const std::int64_t plane = g.cols();
    for (std::int64_t c = 0; c < g.channels; ++c) {
        T* dst = image + c * g.height * g.width;
        for (std::int64_t ky = 0; ky < g.kh; ++ky) {
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
                const T* src = cols + ((c * g.kh + ky) * g.kw + kx) * plane;
                for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
                    const std::int64_t iy = oy * g.stride - g.pad + ky * g.dil;
                    if (iy < 0 || iy >= g.height) continue;
                    T* dst_row = dst + iy * g.width;
                    const T* row = src + oy * g.out_w;
                    for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
                        const std::int64_t ix = ox * g.stride - g.pad + kx * g.dil;
                        if (ix >= 0 && ix < g.width) dst_row[ix] += row[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
void check_bias(const Tensor<T>& bias, std::int64_t channels, const char* op) {
    if (bias.defined() && bias.numel() != channels)
        throw ShapeError(std::string(op) + ": bias has " + std::to_string(bias.numel()) + " values, expected " +
                         std::to_string(channels) + " (output channels)");
}

}  // namespace

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, int stride, int padding, int dilation) {
    const std::int64_t span = in + 2 * padding - static_cast<std::int64_t>(dilation) * (kernel - 1) - 1;
    if (span < 0) return 0;
    return span / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dOptions opt) {
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    if (opt.stride < 1) throw ValueError("conv2d: stride must be >= 1");
    if (opt.dilation < 1) throw ValueError("conv2d: dilation must be >= 1");
    if (opt.padding < 0) throw ValueError("conv2d: padding must be >= 0");
    if (xs.c != ws.c)
        throw ShapeError("conv2d: input channels " + std::to_string(xs.c) + " != weight inC " + std::to_string(ws.c));
    check_bias(bias, ws.n, "conv2d");

    Geometry g{xs.c, xs.h, xs.w, ws.h, ws.w, opt.stride, opt.padding, opt.dilation, 0, 0};
    g.out_h = conv_out_extent(xs.h, ws.h, opt.stride, opt.padding, opt.dilation);
    g.out_w = conv_out_extent(xs.w, ws.w, opt.stride, opt.padding, opt.dilation);
    if (g.out_h < 1) throw ShapeError("conv2d: degenerate output height for input height " + std::to_string(xs.h));
    if (g.out_w < 1) throw ShapeError("conv2d: degenerate output width for input width " + std::to_string(xs.w));

    const Shape out_shape{xs.n, ws.n, g.out_h, g.out_w};
    const std::int64_t K = g.rows(), P = g.cols(), OC = ws.n;
    std::vector<T> out(static_cast<std::size_t>(out_shape.numel()));
    std::vector<T> cols(static_cast<std::size_t>(K * P));
    ConstMatMap<T> W(weight.data().data(), OC, K);
    for (std::int64_t n = 0; n < xs.n; ++n) {
        im2col(input.data().data() + n * xs.c * xs.h * xs.w, g, cols.data());
        MatMap<T> O(out.data() + n * OC * P, OC, P);
        O.noalias() = W * ConstMatMap<T>(cols.data(), K, P);
        if (bias.defined()) {
            for (std::int64_t o = 0; o < OC; ++o) O.row(o).array() += bias.data()[o];
        }
    }

    std::vector<Tensor<T>> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor<T>::make_result(
        out_shape, std::move(out), std::move(inputs),
        [g, xs, OC, K, P](std::span<const T> gout, std::span<const detail::ImplPtr<T>> in) {
            const auto& x = in[0];
            const auto& w = in[1];
            const bool has_bias = in.size() > 2;
            std::vector<T> cols(static_cast<std::size_t>(K * P));
            ConstMatMap<T> W(w->data.data(), OC, K);
            if (w->requires_grad) w->ensure_grad();
            if (x->requires_grad) x->ensure_grad();
            if (has_bias && in[2]->requires_grad) in[2]->ensure_grad();
            for (std::int64_t n = 0; n < xs.n; ++n) {
                ConstMatMap<T> G(gout.data() + n * OC * P, OC, P);
                if (w->requires_grad) {
                    im2col(x->data.data() + n * xs.c * xs.h * xs.w, g, cols.data());
                    MatMap<T>(w->grad.data(), OC, K).noalias() += G * ConstMatMap<T>(cols.data(), K, P).transpose();
                }
                if (x->requires_grad) {
                    MatMap<T>(cols.data(), K, P).noalias() = W.transpose() * G;
                    col2im_add(cols.data(), g, x->grad.data() + n * xs.c * xs.h * xs.w);
                }
                if (has_bias && in[2]->requires_grad) {
                    // Plain loop: Eigen's vectorized sum splits at the first aligned
                    // address, which makes the result depend on where malloc put the buffer.
                    const T* go = gout.data() + n * OC * P;
                    for (std::int64_t o = 0; o < OC; ++o) {
                        T acc = 0;
                        for (std::int64_t p = 0; p < P; ++p) acc += go[o * P + p];
                        in[2]->grad[o] += acc;
                    }
                }
            }
            if (w->requires_grad) w->grad_populated = true;
            if (x->requires_grad) x->grad_populated = true;
            if (has_bias && in[2]->requires_grad) in[2]->grad_populated = true;
        });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding) {
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    if (stride < 1) throw ValueError("conv_transpose2d: stride must be >= 1");
    if (padding < 0) throw ValueError("conv_transpose2d: padding must be >= 0");
    if (xs.c != ws.n)
        throw ShapeError("conv_transpose2d: input channels " + std::to_string(xs.c) + " != weight inC " +
                         std::to_string(ws.n));
    check_bias(bias, ws.c, "conv_transpose2d");
    const std::int64_t out_h = (xs.h - 1) * stride - 2 * padding + ws.h;
    const std::int64_t out_w = (xs.w - 1) * stride - 2 * padding + ws.w;
    if (out_h < 1 || out_w < 1) throw ShapeError("conv_transpose2d: degenerate output extent");

    // Geometry of the forward convolution whose input gradient this op computes.
    Geometry g{ws.c, out_h, out_w, ws.h, ws.w, stride, padding, 1, xs.h, xs.w};
    const Shape out_shape{xs.n, ws.c, out_h, out_w};
    const std::int64_t IC = xs.c, K = g.rows(), P = g.cols(), OC = ws.c;
    std::vector<T> out(static_cast<std::size_t>(out_shape.numel()), T(0));
    std::vector<T> cols(static_cast<std::size_t>(K * P));
    ConstMatMap<T> W(weight.data().data(), IC, K);
    for (std::int64_t n = 0; n < xs.n; ++n) {
        MatMap<T>(cols.data(), K, P).noalias() = W.transpose() * ConstMatMap<T>(input.data().data() + n * IC * P, IC, P);
        T* dst = out.data() + n * OC * out_h * out_w;
        col2im_add(cols.data(), g, dst);
        if (bias.defined()) {
            for (std::int64_t o = 0; o < OC; ++o) {
                const T b = bias.data()[o];
                for (std::int64_t i = 0; i < out_h * out_w; ++i) dst[o * out_h * out_w + i] += b;
            }
        }
    }

    std::vector<Tensor<T>> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor<T>::make_result(
        out_shape, std::move(out), std::move(inputs),
        [g, IC, K, P, OC, xs](std::span<const T> gout, std::span<const detail::ImplPtr<T>> in) {
            const auto& x = in[0];
            const auto& w = in[1];
            const bool has_bias = in.size() > 2;
            const std::int64_t out_plane = g.height * g.width;
            std::vector<T> gcols(static_cast<std::size_t>(K * P));
            if (w->requires_grad) w->ensure_grad();
            if (x->requires_grad) x->ensure_grad();
            if (has_bias && in[2]->requires_grad) in[2]->ensure_grad();
            for (std::int64_t n = 0; n < xs.n; ++n) {
                const T* go = gout.data() + n * OC * out_plane;
                im2col(go, g, gcols.data());
                ConstMatMap<T> GC(gcols.data(), K, P);
                if (x->requires_grad)
                    MatMap<T>(x->grad.data() + n * IC * P, IC, P).noalias() += ConstMatMap<T>(w->data.data(), IC, K) * GC;
                if (w->requires_grad)
                    MatMap<T>(w->grad.data(), IC, K).noalias() +=
                        ConstMatMap<T>(x->data.data() + n * IC * P, IC, P) * GC.transpose();
                if (has_bias && in[2]->requires_grad) {
                    for (std::int64_t o = 0; o < OC; ++o) {
                        T acc = 0;
                        for (std::int64_t i = 0; i < out_plane; ++i) acc += go[o * out_plane + i];
                        in[2]->grad[o] += acc;
                    }
                }
            }
            if (w->requires_grad) w->grad_populated = true;
            if (x->requires_grad) x->grad_populated = true;
            if (has_bias && in[2]->requires_grad) in[2]->grad_populated = true;
        });
}

template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, Conv2dOptions);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, Conv2dOptions);
template Tensor<float> conv_transpose2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, int, int);
template Tensor<double> conv_transpose2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, int,
                                         int);

}  // namespace tsgan
