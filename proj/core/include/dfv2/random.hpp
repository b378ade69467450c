#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dfv2/tensor.hpp"

namespace dfv2 {

/// Seeded generator shared by initialization, data synthesis and augmentation.
/// Values are drawn in double precision so wide and narrow models built from
/// the same seed start from the same (rounded) weights.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    /// Normal resampled until it falls within +-2 stddev.
    double truncated_normal(double stddev) {
        while (true) {
            const double v = normal(0.0, stddev);
            if (v >= -2.0 * stddev && v <= 2.0 * stddev) return v;
        }
    }
    std::int64_t integer(std::int64_t lo, std::int64_t hi_inclusive) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi_inclusive)(engine_);
    }
    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() noexcept { return engine_; }

    template <typename T>
    Tensor<T> truncated_normal_tensor(Shape shape, double stddev, bool requires_grad = true) {
        std::vector<T> data(shape_numel(shape));
        for (auto& v : data) v = static_cast<T>(truncated_normal(stddev));
        return Tensor<T>::from(std::move(shape), std::move(data), requires_grad);
    }

    template <typename T>
    Tensor<T> uniform_tensor(Shape shape, double lo, double hi, bool requires_grad = false) {
        std::vector<T> data(shape_numel(shape));
        for (auto& v : data) v = static_cast<T>(uniform(lo, hi));
        return Tensor<T>::from(std::move(shape), std::move(data), requires_grad);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace dfv2
