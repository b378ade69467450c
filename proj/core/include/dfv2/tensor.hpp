#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfv2/errors.hpp"

namespace dfv2 {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

/// Numeric mode. Wide is used for gradient checks and oracles; narrow for
/// benchmarks and toy training.
enum class Precision { Wide, Narrow };

template <typename T>
constexpr Precision precision_of() {
    return sizeof(T) == sizeof(double) ? Precision::Wide : Precision::Narrow;
}

const char* precision_name(Precision p);

/// Dense row-major tensor handle.
///
/// A Tensor is a cheap shared handle: copies refer to the same storage. Data
/// is treated as immutable once an operation has consumed it; only gradient
/// buffers (written by Tape::backward) and parameters (written by the
/// optimizer step) are mutated in place.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }

    const Shape& shape() const { return node().shape; }
    std::size_t rank() const { return node().shape.size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t numel() const { return node().data.size(); }

    std::span<const T> data() const { return node().data; }
    std::span<T> mutable_data() { return node().data; }
    const T* raw() const { return node().data.data(); }

    /// Value of a single-element tensor.
    T item() const;
    T operator[](std::size_t flat) const { return node().data[flat]; }
    T at(std::size_t i, std::size_t j) const;
    T at(std::size_t i, std::size_t j, std::size_t k) const;

    bool requires_grad() const { return node().requires_grad; }
    void set_requires_grad(bool value) { node().requires_grad = value; }

    bool has_grad() const { return !node().grad.empty(); }
    std::span<const T> grad() const { return node().grad; }
    /// Handles are shallow: gradient buffers stay writable through const handles
    /// so backward closures can accumulate into captured inputs.
    std::span<T> mutable_grad() const { return node().grad; }
    /// Allocates a zero gradient buffer if none exists.
    void ensure_grad();
    void zero_grad();
    void clear_grad() { node().grad.clear(); node().grad.shrink_to_fit(); }

    /// Independent copy of data with no gradient history.
    Tensor detach() const;

    /// Identity comparison of the underlying storage.
    bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }

private:
    struct Node {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;
        bool requires_grad = false;
    };

    Node& node() const;

    std::shared_ptr<Node> node_;
};

using TensorD = Tensor<double>;
using TensorF = Tensor<float>;

/// Element-type conversion; the result carries no gradient.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
    std::vector<To> out(t.numel());
    auto in = t.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(in[i]);
    return Tensor<To>::from(t.shape(), std::move(out));
}

extern template class Tensor<float>;
extern template class Tensor<double>;

} // namespace dfv2
