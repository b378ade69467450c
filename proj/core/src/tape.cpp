#include "dfv2/tape.hpp"

namespace dfv2 {

template <typename T>
bool Tape<T>::tracks(std::initializer_list<const Tensor<T>*> inputs) const {
    if (!recording()) return false;
    for (const auto* t : inputs) {
        if (t != nullptr && t->defined() && t->requires_grad()) return true;
    }
    return false;
}

template <typename T>
void Tape<T>::record(std::vector<Tensor<T>> inputs, Tensor<T> output, BackwardFn backward) {
    if (consumed_) throw UsageError("cannot record onto a tape after backward()");
    output.set_requires_grad(true);
    entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(Tensor<T> loss) {
    if (consumed_) throw UsageError("tape already consumed by a previous backward()");
    if (!loss.defined() || loss.numel() != 1) {
        throw UsageError("backward() requires a scalar loss, got " +
                         (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
    }
    consumed_ = true;

    for (auto& e : entries_) {
        e.output.ensure_grad();
        for (auto& in : e.inputs) {
            if (in.requires_grad()) in.ensure_grad();
        }
    }
    if (!loss.requires_grad()) return;
    loss.ensure_grad();
    loss.mutable_grad()[0] += T{1};

    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        it->fn();
    }
}

template class Tape<float>;
template class Tape<double>;

} // namespace dfv2
