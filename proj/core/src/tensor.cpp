#include "dfv2/tensor.hpp"

#include <algorithm>

namespace dfv2 {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

const char* precision_name(Precision p) {
    return p == Precision::Wide ? "wide" : "narrow";
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + shape_to_string(shape));
    }
}

} // namespace

template <typename T>
typename Tensor<T>::Node& Tensor<T>::node() const {
    if (!node_) throw UsageError("access to an undefined tensor");
    return *node_;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    validate_shape(shape);
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->data.assign(shape_numel(shape), value);
    t.node_->shape = std::move(shape);
    t.node_->requires_grad = requires_grad;
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data, bool requires_grad) {
    validate_shape(shape);
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " data elements");
    }
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t i) const {
    const auto& s = node().shape;
    if (i >= s.size()) {
        throw DimensionError("dimension index " + std::to_string(i) + " out of range for shape " +
                             shape_to_string(s));
    }
    return s[i];
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) {
        throw UsageError("item() requires a single-element tensor, got " + shape_to_string(shape()));
    }
    return node().data[0];
}

template <typename T>
T Tensor<T>::at(std::size_t i, std::size_t j) const {
    const auto& n = node();
    return n.data[i * n.shape[1] + j];
}

template <typename T>
T Tensor<T>::at(std::size_t i, std::size_t j, std::size_t k) const {
    const auto& n = node();
    return n.data[(i * n.shape[1] + j) * n.shape[2] + k];
}

template <typename T>
void Tensor<T>::ensure_grad() {
    auto& n = node();
    if (n.grad.empty()) n.grad.assign(n.data.size(), T{0});
}

template <typename T>
void Tensor<T>::zero_grad() {
    auto& n = node();
    if (n.grad.empty()) {
        n.grad.assign(n.data.size(), T{0});
    } else {
        std::fill(n.grad.begin(), n.grad.end(), T{0});
    }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return from(shape(), std::vector<T>(data().begin(), data().end()));
}

template class Tensor<float>;
template class Tensor<double>;

} // namespace dfv2
