#pragma once

#include <functional>
#include <vector>

#include "dfv2/tensor.hpp"

namespace dfv2 {

/// Ordered record of executed operations for reverse-mode differentiation.
///
/// Operations append an entry only when the tape is recording and at least
/// one input requires a gradient. A tape is single-use: backward() may be
/// called once. A non-recording tape is the inference context.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void()>;

    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    bool recording() const noexcept { return recording_ && !consumed_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// True when the result of an op over `inputs` must be differentiable.
    bool tracks(std::initializer_list<const Tensor<T>*> inputs) const;

    /// Appends an op. `backward` reads output's grad and accumulates into the
    /// grads of inputs that require them (already allocated by backward()).
    void record(std::vector<Tensor<T>> inputs, Tensor<T> output, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
    void backward(Tensor<T> loss);

private:
    struct Entry {
        std::vector<Tensor<T>> inputs;
        Tensor<T> output;
        BackwardFn fn;
    };

    std::vector<Entry> entries_;
    bool recording_ = true;
    bool consumed_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

} // namespace dfv2
