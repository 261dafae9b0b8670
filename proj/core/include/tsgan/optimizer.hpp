#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsgan/param_store.hpp"

namespace tsgan {

enum class OptimizerMethod { adam, sgd };

OptimizerMethod parse_optimizer_method(const std::string& name);
std::string to_string(OptimizerMethod method);

struct OptimizerOptions {
    OptimizerMethod method = OptimizerMethod::adam;
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-parameter Adam moments.
template <typename T>
struct AdamSlot {
    std::vector<T> m;
    std::vector<T> v;
    std::int64_t steps = 0;
};

/// Applies one update to each parameter then zeroes its gradient. Adam state
/// is keyed by parameter name and survives across calls.
template <typename T>
class Optimizer {
public:
    explicit Optimizer(OptimizerOptions options = {}) : options_(options) {}

    /// Throws ValueError naming the first parameter without a populated grad.
    void step(std::span<const NamedTensor<T>> params);

    [[nodiscard]] const OptimizerOptions& options() const { return options_; }
    void set_lr(double lr) { options_.lr = lr; }

    [[nodiscard]] const std::map<std::string, AdamSlot<T>>& state() const { return state_; }
    std::map<std::string, AdamSlot<T>>& state() { return state_; }

private:
    OptimizerOptions options_;
    std::map<std::string, AdamSlot<T>> state_;
};

/// Clamps every value of every tensor into [-limit, limit].
template <typename T>
void clip_values(std::span<const NamedTensor<T>> params, T limit);

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace tsgan
