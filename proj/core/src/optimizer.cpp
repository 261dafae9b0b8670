#include "tsgan/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace tsgan {

OptimizerMethod parse_optimizer_method(const std::string& name) {
    if (name == "adam") return OptimizerMethod::adam;
    if (name == "sgd") return OptimizerMethod::sgd;
    throw ValueError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(OptimizerMethod method) { return method == OptimizerMethod::adam ? "adam" : "sgd"; }

template <typename T>
void Optimizer<T>::step(std::span<const NamedTensor<T>> params) {
    for (const auto& p : params) {
        if (!p.tensor.requires_grad() || !p.tensor.has_grad())
            throw ValueError("optimizer step: parameter '" + p.name + "' has no gradient");
    }
    for (const auto& p : params) {
        Tensor<T> param = p.tensor;
        auto values = param.mutable_data();
        auto grads = param.mutable_grad();
        if (options_.method == OptimizerMethod::sgd) {
            for (std::size_t i = 0; i < values.size(); ++i)
                values[i] = static_cast<T>(values[i] - options_.lr * grads[i]);
        } else {
            auto& slot = state_[p.name];
            if (slot.m.size() != values.size()) {
                slot.m.assign(values.size(), T(0));
                slot.v.assign(values.size(), T(0));
                slot.steps = 0;
            }
            ++slot.steps;
            const double b1 = options_.beta1, b2 = options_.beta2;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(slot.steps));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(slot.steps));
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double g = grads[i];
                const double m = b1 * slot.m[i] + (1.0 - b1) * g;
                const double v = b2 * slot.v[i] + (1.0 - b2) * g * g;
                slot.m[i] = static_cast<T>(m);
                slot.v[i] = static_cast<T>(v);
                values[i] = static_cast<T>(values[i] - options_.lr * (m / c1) / (std::sqrt(v / c2) + options_.eps));
            }
        }
        param.zero_grad();
    }
}

template <typename T>
void clip_values(std::span<const NamedTensor<T>> params, T limit) {
    for (const auto& p : params) {
        Tensor<T> t = p.tensor;
        for (auto& v : t.mutable_data()) v = std::clamp(v, -limit, limit);
    }
}

template class Optimizer<float>;
template class Optimizer<double>;
template void clip_values(std::span<const NamedTensor<float>>, float);
template void clip_values(std::span<const NamedTensor<double>>, double);

}  // namespace tsgan
