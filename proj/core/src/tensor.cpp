#include "tsgan/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace tsgan {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
        throw ShapeError("negative extent in shape " + shape.str());
    return from_data(shape, std::vector<T>(static_cast<std::size_t>(shape.numel()), value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
    if (static_cast<std::int64_t>(data.size()) != shape.numel())
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape.str());
    auto impl = std::make_shared<detail::TensorImpl<T>>();
    impl->shape = shape;
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->ensure_grad();
    return Tensor(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return from_data({1, 1, 1, 1}, {value}, requires_grad);
}

template <typename T>
const detail::TensorImpl<T>& Tensor<T>::checked() const {
    if (!impl_) throw Error("use of an undefined tensor");
    return *impl_;
}

template <typename T>
detail::TensorImpl<T>& Tensor<T>::checked() {
    if (!impl_) throw Error("use of an undefined tensor");
    return *impl_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
    return checked().shape;
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
    return checked().data;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
    return checked().data;
}

template <typename T>
T Tensor<T>::at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    const auto& s = shape();
    return data()[static_cast<std::size_t>(((n * s.c + c) * s.h + h) * s.w + w)];
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
    return data()[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
    return checked().requires_grad;
}

template <typename T>
bool Tensor<T>::has_grad() const {
    return checked().grad_populated;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
    const auto& impl = checked();
    if (!impl.requires_grad) throw Error("grad() on a tensor that does not require grad");
    return impl.grad;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
    auto& impl = checked();
    if (!impl.requires_grad) throw Error("grad() on a tensor that does not require grad");
    impl.ensure_grad();
    return impl.grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
    auto& impl = checked();
    if (!impl.requires_grad) return;
    impl.grad.assign(impl.data.size(), T(0));
    impl.grad_populated = false;
}

template <typename T>
void Tensor<T>::backward() const {
    const auto& root = checked();
    if (root.shape != Shape{1, 1, 1, 1})
        throw ShapeError("backward() needs a scalar (1,1,1,1) loss, got " + root.shape.str());
    if (!root.requires_grad) throw Error("backward() on a tensor that does not require grad");

    // Iterative post-order DFS gives a topological order (inputs before outputs).
    std::vector<detail::TensorImpl<T>*> order;
    std::unordered_set<const detail::TensorImpl<T>*> visited;
    std::vector<std::pair<detail::TensorImpl<T>*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    visited.insert(impl_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (node->grad_fn && next < node->grad_fn->inputs.size()) {
            auto* child = node->grad_fn->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
            continue;
        }
        order.push_back(node);
        stack.pop_back();
    }

    // Interior gradients are per-pass scratch; leaf gradients accumulate.
    for (auto* node : order) {
        if (node->grad_fn) {
            node->grad.assign(node->data.size(), T(0));
            node->grad_populated = false;
        }
    }
    auto& root_mut = *impl_;
    root_mut.ensure_grad();
    root_mut.grad[0] += T(1);
    root_mut.grad_populated = true;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* node = *it;
        if (!node->grad_fn || !node->grad_populated) continue;
        node->grad_fn->backward(std::span<const T>(node->grad), node->grad_fn->inputs);
    }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    const auto& impl = checked();
    return from_data(impl.shape, impl.data, false);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> data, std::vector<Tensor> inputs,
                                 detail::BackwardFn<T> backward) {
    Tensor out = from_data(shape, std::move(data), false);
    if (!grad_enabled()) return out;
    const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (!any) return out;
    auto node = std::make_shared<detail::Node<T>>();
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.impl_);
    node->backward = std::move(backward);
    out.impl_->requires_grad = true;
    out.impl_->grad_fn = std::move(node);
    return out;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace tsgan
