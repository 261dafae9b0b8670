#include "tsgan/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "tsgan/error.hpp"
#include "tsgan/ops.hpp"

namespace tsgan {

GanMode parse_gan_mode(const std::string& name) {
    if (name == "wgan-clip") return GanMode::wgan_clip;
    if (name == "standard") return GanMode::standard;
    throw ValueError("unknown gan_mode '" + name + "' (expected wgan-clip or standard)");
}

std::string to_string(GanMode mode) { return mode == GanMode::wgan_clip ? "wgan-clip" : "standard"; }

void LossWeights::validate() const {
    const std::array<std::pair<const char*, double>, 5> lambdas{
        {{"lambda1", lambda1}, {"lambda2", lambda2}, {"lambda3", lambda3}, {"lambda4", lambda4}, {"lambda5", lambda5}}};
    for (const auto& [name, v] : lambdas)
        if (!(v >= 0) || !std::isfinite(v)) throw ValueError(std::string(name) + " must be a finite value >= 0");
    if (!(alpha > 0) || !std::isfinite(alpha)) throw ValueError("alpha must be > 0");
}

void to_json(nlohmann::json& j, const LossWeights& w) {
    j = nlohmann::json{{"lambda1", w.lambda1}, {"lambda2", w.lambda2}, {"lambda3", w.lambda3},
                       {"lambda4", w.lambda4}, {"lambda5", w.lambda5}, {"alpha", w.alpha},
                       {"gan_mode", to_string(w.gan_mode)}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
    const LossWeights d;
    w.lambda1 = j.value("lambda1", d.lambda1);
    w.lambda2 = j.value("lambda2", d.lambda2);
    w.lambda3 = j.value("lambda3", d.lambda3);
    w.lambda4 = j.value("lambda4", d.lambda4);
    w.lambda5 = j.value("lambda5", d.lambda5);
    w.alpha = j.value("alpha", d.alpha);
    w.gan_mode = parse_gan_mode(j.value("gan_mode", to_string(d.gan_mode)));
}

template <typename T>
Tensor<T> l2_pixel_loss(const Tensor<T>& pred, const Tensor<T>& truth) {
    if (!(pred.shape() == truth.shape()))
        throw ShapeError("l2_pixel_loss: prediction " + pred.shape().str() + " vs truth " + truth.shape().str());
    const auto p = pred.data(), t = truth.data();
    const double denom = 2.0 * static_cast<double>(pred.numel());
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        acc += d * d;
    }
    return Tensor<T>::make_result(
        {1, 1, 1, 1}, {static_cast<T>(acc / denom)}, {pred, truth},
        [denom](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
            const auto& pi = in[0]->data;
            const auto& ti = in[1]->data;
            const double k = 2.0 * static_cast<double>(g[0]) / denom;
            std::vector<T> gp(pi.size()), gt(pi.size());
            for (std::size_t i = 0; i < pi.size(); ++i) {
                gp[i] = static_cast<T>(k * (static_cast<double>(pi[i]) - static_cast<double>(ti[i])));
                gt[i] = -gp[i];
            }
            accumulate_grad<T>(in[0], gp);
            accumulate_grad<T>(in[1], gt);
        });
}

namespace {

// -mean(label ? log(p) : log(1 - p)); probabilities clamped away from 0 and 1.
template <typename T>
Tensor<T> bce_mean(const Tensor<T>& prob, bool label) {
    constexpr double lo = 1e-12;
    const auto p = prob.data();
    const double n = static_cast<double>(p.size());
    double acc = 0;
    for (T v : p) {
        const double q = std::clamp(label ? static_cast<double>(v) : 1.0 - static_cast<double>(v), lo, 1.0);
        acc -= std::log(q);
    }
    return Tensor<T>::make_result({1, 1, 1, 1}, {static_cast<T>(acc / n)}, {prob},
                                  [label, n](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
                                      const auto& d = in[0]->data;
                                      std::vector<T> out(d.size());
                                      for (std::size_t i = 0; i < d.size(); ++i) {
                                          const double v = static_cast<double>(d[i]);
                                          const double q = label ? v : 1.0 - v;
                                          if (q < lo) continue;
                                          const double dq = label ? 1.0 : -1.0;
                                          out[i] = static_cast<T>(-static_cast<double>(g[0]) * dq / (q * n));
                                      }
                                      accumulate_grad<T>(in[0], out);
                                  });
}

}  // namespace

template <typename T>
AdversarialLosses<T> adversarial_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake, GanMode mode) {
    if (!(d_real.shape() == d_fake.shape()))
        throw ShapeError("adversarial_losses: real scores " + d_real.shape().str() + " vs fake scores " +
                         d_fake.shape().str());
    if (mode == GanMode::wgan_clip) {
        const Tensor<T> fake_mean = mean(d_fake);
        return {scale(fake_mean, T(-1)), sub(fake_mean, mean(d_real))};
    }
    return {bce_mean(d_fake, true), add(bce_mean(d_real, true), bce_mean(d_fake, false))};
}

template <typename T>
Tensor<T> tv_loss(const Tensor<T>& map, double alpha) {
    if (!(alpha > 0)) throw ValueError("tv_loss: alpha must be > 0");
    const Shape s = map.shape();
    if (s.h < 2 && s.w < 2) throw ShapeError("tv_loss: map " + s.str() + " has no neighboring pixels");
    const double e = 1.0 / alpha;
    const auto x = map.data();
    const std::int64_t H = s.h, W = s.w;
    auto idx = [&](std::int64_t plane, std::int64_t i, std::int64_t j) {
        return static_cast<std::size_t>((plane * H + i) * W + j);
    };
    double acc = 0;
    for (std::int64_t p = 0; p < s.n * s.c; ++p)
        for (std::int64_t i = 0; i < H; ++i)
            for (std::int64_t j = 0; j < W; ++j) {
                const double c = static_cast<double>(x[idx(p, i, j)]);
                const double dx = j + 1 < W ? static_cast<double>(x[idx(p, i, j + 1)]) - c : 0.0;
                const double dy = i + 1 < H ? static_cast<double>(x[idx(p, i + 1, j)]) - c : 0.0;
                const double u = dx * dx + dy * dy;
                acc += e == 1.0 ? u : std::pow(u, e);
            }
    const double n = static_cast<double>(s.n);
    return Tensor<T>::make_result(
        {1, 1, 1, 1}, {static_cast<T>(acc / n)}, {map},
        [s, e, n](std::span<const T> g, std::span<const detail::ImplPtr<T>> in) {
            const auto& d = in[0]->data;
            const std::int64_t H = s.h, W = s.w;
            auto at = [&](std::int64_t plane, std::int64_t i, std::int64_t j) {
                return static_cast<std::size_t>((plane * H + i) * W + j);
            };
            std::vector<double> out(d.size(), 0.0);
            const double go = static_cast<double>(g[0]) / n;
            for (std::int64_t p = 0; p < s.n * s.c; ++p)
                for (std::int64_t i = 0; i < H; ++i)
                    for (std::int64_t j = 0; j < W; ++j) {
                        const double c = static_cast<double>(d[at(p, i, j)]);
                        const bool hx = j + 1 < W, hy = i + 1 < H;
                        const double dx = hx ? static_cast<double>(d[at(p, i, j + 1)]) - c : 0.0;
                        const double dy = hy ? static_cast<double>(d[at(p, i + 1, j)]) - c : 0.0;
                        const double u = dx * dx + dy * dy;
                        double df = 1.0;
                        if (e != 1.0) df = u > 0 ? e * std::pow(u, e - 1.0) : 0.0;
                        const double k = go * df * 2.0;
                        if (hx) out[at(p, i, j + 1)] += k * dx;
                        if (hy) out[at(p, i + 1, j)] += k * dy;
                        out[at(p, i, j)] -= k * (dx + dy);
                    }
            std::vector<T> cast(out.begin(), out.end());
            accumulate_grad<T>(in[0], cast);
        });
}

template <typename T>
WeightedLoss<T> total_loss(const LossTerms<T>& terms, const LossWeights& weights) {
    weights.validate();
    const std::array<std::tuple<const char*, const Tensor<T>*, double>, 5> parts{{
        {"l1", &terms.l1, weights.lambda1},
        {"l2_g", &terms.l2_g, weights.lambda2},
        {"l3", &terms.l3, weights.lambda3},
        {"l4_g", &terms.l4_g, weights.lambda4},
        {"tv", &terms.tv, weights.lambda5},
    }};
    WeightedLoss<T> out;
    std::array<double, 5> values{};
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& [name, term, lambda] = parts[k];
        if (!term->defined()) {
            if (lambda != 0) throw ValueError(std::string("loss term ") + name + " is missing but weighted");
            continue;
        }
        if (term->numel() != 1) throw ShapeError(std::string("loss term ") + name + " is not a scalar");
        values[k] = static_cast<double>(term->item());
        if (!std::isfinite(values[k]))
            throw ValueError(std::string("non-finite loss term ") + name + " = " + std::to_string(values[k]));
        const Tensor<T> weighted = scale(*term, static_cast<T>(lambda));
        out.total = out.total.defined() ? add(out.total, weighted) : weighted;
    }
    if (!out.total.defined()) out.total = Tensor<T>::scalar(T(0));
    out.report.l1 = values[0];
    out.report.l2_g = values[1];
    out.report.l3 = values[2];
    out.report.l4_g = values[3];
    out.report.tv = values[4];
    out.report.total = weights.lambda1 * values[0] + weights.lambda2 * values[1] + weights.lambda3 * values[2] +
                       weights.lambda4 * values[3] + weights.lambda5 * values[4];
    return out;
}

#define TSGAN_INSTANTIATE(T)                                                                             \
    template Tensor<T> l2_pixel_loss(const Tensor<T>&, const Tensor<T>&);                               \
    template AdversarialLosses<T> adversarial_losses(const Tensor<T>&, const Tensor<T>&, GanMode);      \
    template Tensor<T> tv_loss(const Tensor<T>&, double);                                                \
    template WeightedLoss<T> total_loss(const LossTerms<T>&, const LossWeights&);

TSGAN_INSTANTIATE(float)
TSGAN_INSTANTIATE(double)

#undef TSGAN_INSTANTIATE

}  // namespace tsgan
