#pragma once

#include <vector>

#include "dfv2/model.hpp"

namespace dfv2 {

struct AdamWOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

/// Adam with decoupled weight decay. Decay applies only to tensors of rank >= 2
/// (biases, norm parameters and fusion scalars are exempt).
template <typename T>
class AdamW {
public:
    AdamW(std::vector<NamedTensor<T>> params, AdamWOptions options);

    /// Applies one update using each parameter's accumulated gradient.
    /// Parameters without a gradient are left untouched.
    void step(double lr);
    void zero_grad();
    std::size_t steps_taken() const noexcept { return t_; }

private:
    std::vector<NamedTensor<T>> params_;
    AdamWOptions opt_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

/// base * (1 - step / total)^power, reaching 0 at step == total.
double poly_lr(double base, std::size_t step, std::size_t total, double power);

extern template class AdamW<float>;
extern template class AdamW<double>;

} // namespace dfv2
