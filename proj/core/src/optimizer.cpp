#include "dfv2/optimizer.hpp"

#include <cmath>

namespace dfv2 {

template <typename T>
AdamW<T>::AdamW(std::vector<NamedTensor<T>> params, AdamWOptions options)
    : params_(std::move(params)), opt_(options) {
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

template <typename T>
void AdamW<T>::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i].tensor;
        if (!p.has_grad()) continue;
        const double decay = p.rank() >= 2 ? lr * opt_.weight_decay : 0.0;
        auto x = p.mutable_data();
        const auto g = p.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * gj;
            v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * gj * gj;
            const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + opt_.eps);
            double xj = static_cast<double>(x[j]);
            xj -= decay * xj;
            xj -= lr * update;
            x[j] = static_cast<T>(xj);
        }
    }
}

template <typename T>
void AdamW<T>::zero_grad() {
    for (auto& p : params_) p.tensor.clear_grad();
}

double poly_lr(double base, std::size_t step, std::size_t total, double power) {
    if (total == 0 || step >= total) return step >= total && total > 0 ? 0.0 : base;
    return base * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(total), power);
}

template class AdamW<float>;
template class AdamW<double>;

} // namespace dfv2
