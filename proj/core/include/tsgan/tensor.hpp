#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tsgan/error.hpp"

namespace tsgan {

/// NCHW extent of a dense tensor.
struct Shape {
    std::int64_t n = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    [[nodiscard]] std::int64_t numel() const { return n * c * h * w; }
    [[nodiscard]] std::int64_t plane() const { return h * w; }
    [[nodiscard]] std::string str() const;
    friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

/// Receives the gradient of the node's output and accumulates into the inputs.
template <typename T>
using BackwardFn = std::function<void(std::span<const T> grad_out, std::span<const ImplPtr<T>> inputs)>;

template <typename T>
struct Node {
    std::vector<ImplPtr<T>> inputs;
    BackwardFn<T> backward;
};

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    // Set when a backward pass wrote into grad; cleared by zero_grad().
    bool grad_populated = false;
    std::shared_ptr<Node<T>> grad_fn;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
};

}  // namespace detail

/// Whether newly created op results record a backward graph on this thread.
bool grad_enabled();

/// Disables graph recording for its lifetime (evaluation, detached fakes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Dense NCHW tensor handle with reverse-mode gradient recording.
///
/// Copies share storage. Data is treated as immutable once the tensor takes
/// part in a graph; only leaves (parameters) are mutated in place, by the
/// optimizer or by initialization code.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    [[nodiscard]] bool defined() const { return impl_ != nullptr; }
    [[nodiscard]] const Shape& shape() const;
    [[nodiscard]] std::int64_t numel() const { return shape().numel(); }

    [[nodiscard]] std::span<const T> data() const;
    [[nodiscard]] std::span<T> mutable_data();
    [[nodiscard]] T at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const;
    [[nodiscard]] T item() const;

    [[nodiscard]] bool requires_grad() const;
    [[nodiscard]] bool has_grad() const;
    [[nodiscard]] std::span<const T> grad() const;
    [[nodiscard]] std::span<T> mutable_grad();
    void zero_grad();

    /// Back-propagates d(this)/d(leaf) into every reachable requires_grad
    /// tensor. Leaf gradients accumulate across calls.
    void backward() const;

    /// Same values, no history, no gradient.
    [[nodiscard]] Tensor detach() const;

    template <typename U>
    [[nodiscard]] Tensor<U> cast() const {
        std::vector<U> out(data().begin(), data().end());
        return Tensor<U>::from_data(shape(), std::move(out));
    }

    [[nodiscard]] bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
    [[nodiscard]] const detail::ImplPtr<T>& impl() const { return impl_; }

    /// Builds an op result; records a graph node only when grad is enabled and
    /// some input requires grad.
    static Tensor make_result(Shape shape, std::vector<T> data, std::vector<Tensor> inputs,
                              detail::BackwardFn<T> backward);

private:
    explicit Tensor(detail::ImplPtr<T> impl) : impl_(std::move(impl)) {}
    const detail::TensorImpl<T>& checked() const;
    detail::TensorImpl<T>& checked();

    detail::ImplPtr<T> impl_;
};

/// Accumulates `values` into the gradient of `input` if it tracks one.
template <typename T>
inline void accumulate_grad(const detail::ImplPtr<T>& input, std::span<const T> values) {
    if (!input->requires_grad) return;
    input->ensure_grad();
    for (std::size_t i = 0; i < values.size(); ++i) input->grad[i] += values[i];
    input->grad_populated = true;
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace tsgan
