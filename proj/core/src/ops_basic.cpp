#include <cmath>
#include <numeric>

#include "tsgan/ops.hpp"

namespace tsgan {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

// Pointwise unary op given value and derivative-from-(input, output) functions.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, F f, D df) {
    auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = f(src[i]);
    return Tensor<T>::make_result(x.shape(), std::move(out), {x},
                                  [df](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
                                      const auto& xi = in[0];
                                      if (!xi->requires_grad) return;
                                      xi->ensure_grad();
                                      for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i] * df(xi->data[i]);
                                      xi->grad_populated = true;
                                  });
}

}  // namespace

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, int kernel, int stride) {
    if (kernel < 1) throw ValueError("maxpool2d: kernel must be >= 1");
    if (stride < 1) throw ValueError("maxpool2d: stride must be >= 1");
    const Shape& s = input.shape();
    if (s.h < kernel || s.w < kernel)
        throw ShapeError("maxpool2d: window " + std::to_string(kernel) + " larger than input " + s.str());
    const std::int64_t oh = (s.h - kernel) / stride + 1;
    const std::int64_t ow = (s.w - kernel) / stride + 1;
    const Shape os{s.n, s.c, oh, ow};
    std::vector<T> out(static_cast<std::size_t>(os.numel()));
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
    auto src = input.data();
    std::size_t o = 0;
    for (std::int64_t p = 0; p < s.n * s.c; ++p) {
        const std::int64_t base = p * s.h * s.w;
        for (std::int64_t y = 0; y < oh; ++y) {
            for (std::int64_t x = 0; x < ow; ++x, ++o) {
                std::int64_t best = base + (y * stride) * s.w + x * stride;
                for (std::int64_t ky = 0; ky < kernel; ++ky) {
                    for (std::int64_t kx = 0; kx < kernel; ++kx) {
                        const std::int64_t idx = base + (y * stride + ky) * s.w + x * stride + kx;
                        if (src[idx] > src[best]) best = idx;  // strict: first index wins ties
                    }
                }
                out[o] = src[best];
                (*argmax)[o] = best;
            }
        }
    }
    return Tensor<T>::make_result(os, std::move(out), {input},
                                  [argmax](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
                                      const auto& x = in[0];
                                      if (!x->requires_grad) return;
                                      x->ensure_grad();
                                      for (std::size_t i = 0; i < g.size(); ++i) x->grad[(*argmax)[i]] += g[i];
                                      x->grad_populated = true;
                                  });
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      RunningMoments<T>& state, NormMode mode, BatchNormOptions opt) {
    const Shape& s = input.shape();
    if (gamma.numel() != s.c || beta.numel() != s.c)
        throw ShapeError("batchnorm2d: gamma/beta need " + std::to_string(s.c) + " values");
    if (state.mean.size() != static_cast<std::size_t>(s.c) || state.var.size() != static_cast<std::size_t>(s.c))
        throw ShapeError("batchnorm2d: running moments sized for " + std::to_string(state.mean.size()) +
                         " channels, input has " + std::to_string(s.c));
    const std::int64_t per_channel = s.n * s.h * s.w;
    if (mode == NormMode::train && per_channel < 2)
        throw ValueError("batchnorm2d: train mode needs at least 2 values per channel, got " +
                         std::to_string(per_channel));

    const auto src = input.data();
    const std::int64_t plane = s.h * s.w;
    std::vector<T> inv_std(static_cast<std::size_t>(s.c));
    std::vector<T> centre(static_cast<std::size_t>(s.c));
    for (std::int64_t c = 0; c < s.c; ++c) {
        if (mode == NormMode::train) {
            double mu = 0;
            for (std::int64_t n = 0; n < s.n; ++n)
                for (std::int64_t i = 0; i < plane; ++i) mu += src[(n * s.c + c) * plane + i];
            mu /= static_cast<double>(per_channel);
            double var = 0;
            for (std::int64_t n = 0; n < s.n; ++n) {
                for (std::int64_t i = 0; i < plane; ++i) {
                    const double d = src[(n * s.c + c) * plane + i] - mu;
                    var += d * d;
                }
            }
            const double biased = var / static_cast<double>(per_channel);
            const double unbiased = var / static_cast<double>(per_channel - 1);
            centre[c] = static_cast<T>(mu);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(biased + opt.eps));
            state.mean[c] = static_cast<T>((1.0 - opt.momentum) * state.mean[c] + opt.momentum * mu);
            state.var[c] = static_cast<T>((1.0 - opt.momentum) * state.var[c] + opt.momentum * unbiased);
        } else {
            centre[c] = state.mean[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.var[c]) + opt.eps));
        }
    }

    std::vector<T> out(src.size());
    auto xhat = std::make_shared<std::vector<T>>(src.size());
    for (std::int64_t n = 0; n < s.n; ++n) {
        for (std::int64_t c = 0; c < s.c; ++c) {
            const T g = gamma.data()[c], b = beta.data()[c];
            for (std::int64_t i = 0; i < plane; ++i) {
                const std::size_t idx = static_cast<std::size_t>((n * s.c + c) * plane + i);
                (*xhat)[idx] = (src[idx] - centre[c]) * inv_std[c];
                out[idx] = g * (*xhat)[idx] + b;
            }
        }
    }

    const bool train = mode == NormMode::train;
    return Tensor<T>::make_result(
        s, std::move(out), {input, gamma, beta},
        [s, xhat, inv_std, train, per_channel, plane](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
            const auto& x = in[0];
            const auto& gm = in[1];
            const auto& bt = in[2];
            for (const auto& t : in)
                if (t->requires_grad) t->ensure_grad();
            for (std::int64_t c = 0; c < s.c; ++c) {
                double sum_g = 0, sum_gx = 0;
                for (std::int64_t n = 0; n < s.n; ++n) {
                    for (std::int64_t i = 0; i < plane; ++i) {
                        const std::size_t idx = static_cast<std::size_t>((n * s.c + c) * plane + i);
                        sum_g += g[idx];
                        sum_gx += g[idx] * (*xhat)[idx];
                    }
                }
                if (gm->requires_grad) gm->grad[c] += static_cast<T>(sum_gx);
                if (bt->requires_grad) bt->grad[c] += static_cast<T>(sum_g);
                if (!x->requires_grad) continue;
                const double scale = static_cast<double>(gm->data[c]) * inv_std[c];
                const double m = static_cast<double>(per_channel);
                for (std::int64_t n = 0; n < s.n; ++n) {
                    for (std::int64_t i = 0; i < plane; ++i) {
                        const std::size_t idx = static_cast<std::size_t>((n * s.c + c) * plane + i);
                        if (train) {
                            x->grad[idx] += static_cast<T>(scale / m * (m * g[idx] - sum_g - (*xhat)[idx] * sum_gx));
                        } else {
                            x->grad[idx] += static_cast<T>(scale * g[idx]);
                        }
                    }
                }
            }
            for (const auto& t : in)
                if (t->requires_grad) t->grad_populated = true;
        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    return unary(
        x, [slope](T v) { return v > T(0) ? v : slope * v; }, [slope](T v) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    auto f = [](T v) {
        // Split by sign so exp never overflows.
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
    };
    return unary(x, f, [f](T v) {
        const T s = f(v);
        return s * (T(1) - s);
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    return unary(x, [factor](T v) { return v * factor; }, [factor](T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
    return unary(x, [value](T v) { return v + value; }, [](T) { return T(1); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
    return unary(x, [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    std::vector<T> out(a.data().begin(), a.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b},
                                  [](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
                                      accumulate_grad(in[0], g);
                                      accumulate_grad(in[1], g);
                                  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    std::vector<T> out(a.data().begin(), a.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b},
                                  [](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
                                      accumulate_grad(in[0], g);
                                      if (!in[1]->requires_grad) return;
                                      in[1]->ensure_grad();
                                      for (std::size_t i = 0; i < g.size(); ++i) in[1]->grad[i] -= g[i];
                                      in[1]->grad_populated = true;
                                  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    std::vector<T> out(a.data().begin(), a.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b},
                                  [](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
                                      for (int k = 0; k < 2; ++k) {
                                          const auto& self = in[k];
                                          const auto& other = in[1 - k];
                                          if (!self->requires_grad) continue;
                                          self->ensure_grad();
                                          for (std::size_t i = 0; i < g.size(); ++i)
                                              self->grad[i] += g[i] * other->data[i];
                                          self->grad_populated = true;
                                      }
                                  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    double acc = 0;
    for (T v : x.data()) acc += v;
    return Tensor<T>::make_result({1, 1, 1, 1}, {static_cast<T>(acc)}, {x},
                                  [](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
                                      const auto& xi = in[0];
                                      if (!xi->requires_grad) return;
                                      xi->ensure_grad();
                                      for (auto& v : xi->grad) v += g[0];
                                      xi->grad_populated = true;
                                  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    const auto count = static_cast<double>(x.numel());
    if (count == 0) throw ShapeError("mean of an empty tensor");
    double acc = 0;
    for (T v : x.data()) acc += v;
    return Tensor<T>::make_result({1, 1, 1, 1}, {static_cast<T>(acc / count)}, {x},
                                  [count](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
                                      const auto& xi = in[0];
                                      if (!xi->requires_grad) return;
                                      xi->ensure_grad();
                                      const T share = static_cast<T>(g[0] / count);
                                      for (auto& v : xi->grad) v += share;
                                      xi->grad_populated = true;
                                  });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    const Shape& first = parts.front().shape();
    std::int64_t channels = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w)
            throw ShapeError("concat_channels: n/h/w mismatch " + first.str() + " vs " + s.str());
        channels += s.c;
    }
    const Shape os{first.n, channels, first.h, first.w};
    const std::int64_t plane = first.h * first.w;
    std::vector<T> out(static_cast<std::size_t>(os.numel()));
    std::vector<std::int64_t> offsets;
    std::int64_t offset = 0;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const std::int64_t pc = p.shape().c;
        for (std::int64_t n = 0; n < first.n; ++n) {
            std::copy_n(p.data().data() + n * pc * plane, pc * plane, out.data() + (n * channels + offset) * plane);
        }
        offset += pc;
    }
    return Tensor<T>::make_result(
        os, std::move(out), parts,
        [offsets, channels, plane, batch = first.n](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
            for (std::size_t k = 0; k < in.size(); ++k) {
                const auto& p = in[k];
                if (!p->requires_grad) continue;
                p->ensure_grad();
                const std::int64_t pc = p->shape.c;
                for (std::int64_t n = 0; n < batch; ++n) {
                    const T* src = g.data() + (n * channels + offsets[k]) * plane;
                    T* dst = p->grad.data() + n * pc * plane;
                    for (std::int64_t i = 0; i < pc * plane; ++i) dst[i] += src[i];
                }
                p->grad_populated = true;
            }
        });
}

#define TSGAN_INSTANTIATE(T)                                                                                  \
    template Tensor<T> maxpool2d(const Tensor<T>&, int, int);                                                \
    template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, RunningMoments<T>&, \
                                   NormMode, BatchNormOptions);                                              \
    template Tensor<T> relu(const Tensor<T>&);                                                               \
    template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                      \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                            \
    template Tensor<T> scale(const Tensor<T>&, T);                                                           \
    template Tensor<T> add_scalar(const Tensor<T>&, T);                                                      \
    template Tensor<T> square(const Tensor<T>&);                                                             \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                              \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                              \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                              \
    template Tensor<T> sum(const Tensor<T>&);                                                                \
    template Tensor<T> mean(const Tensor<T>&);                                                               \
    template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);

TSGAN_INSTANTIATE(float)
TSGAN_INSTANTIATE(double)

#undef TSGAN_INSTANTIATE

}  // namespace tsgan
