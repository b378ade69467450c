#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dfv2/tensor.hpp"

namespace dfv2 {

/// counts[g][p]: rows are ground truth, columns are predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes);

    /// Accumulates pixels whose ground truth is not the ignore index. Labels or
    /// predictions outside [0, K) raise DataError.
    void add(std::span<const int> ground_truth, std::span<const int> prediction);
    void merge(const ConfusionMatrix& other);

    std::size_t num_classes() const noexcept { return k_; }
    std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * k_ + pred]; }
    std::uint64_t row_sum(std::size_t gt) const;
    std::uint64_t col_sum(std::size_t pred) const;
    std::uint64_t total() const;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

struct MiouResult {
    double miou = 0.0;                             // 0 when no class is valid
    std::vector<std::optional<double>> per_class;  // nullopt: zero denominator, excluded
    std::size_t valid_classes = 0;
};

/// IoU_k = cm[k][k] / (row_k + col_k - cm[k][k]), averaged over classes with a
/// nonzero denominator.
MiouResult miou(const ConfusionMatrix& cm);

/// Per-pixel argmax over logits [K x h x w]; ties go to the lowest class index.
template <typename T>
std::vector<int> argmax_classes(const Tensor<T>& logits);

} // namespace dfv2
