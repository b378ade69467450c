#include "dfv2/metrics.hpp"

#include "dfv2/dataset.hpp"

namespace dfv2 {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes == 0) throw ParameterError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::span<const int> gt, std::span<const int> pred) {
    if (gt.size() != pred.size()) {
        throw DimensionError("confusion matrix: " + std::to_string(gt.size()) + " labels vs " +
                             std::to_string(pred.size()) + " predictions");
    }
    const auto k = static_cast<int>(k_);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == kIgnoreIndex) continue;
        if (gt[i] < 0 || gt[i] >= k) throw DataError("confusion matrix: label " + std::to_string(gt[i]) + " out of range");
        if (pred[i] < 0 || pred[i] >= k) {
            throw DataError("confusion matrix: prediction " + std::to_string(pred[i]) + " out of range");
        }
        ++counts_[static_cast<std::size_t>(gt[i]) * k_ + static_cast<std::size_t>(pred[i])];
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw DimensionError("confusion matrix: class counts differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t gt) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < k_; ++p) s += at(gt, p);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (std::size_t g = 0; g < k_; ++g) s += at(g, pred);
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
}

MiouResult miou(const ConfusionMatrix& cm) {
    MiouResult r;
    double sum = 0.0;
    for (std::size_t k = 0; k < cm.num_classes(); ++k) {
        const std::uint64_t diag = cm.at(k, k);
        const std::uint64_t denom = cm.row_sum(k) + cm.col_sum(k) - diag;
        if (denom == 0) {
            r.per_class.emplace_back(std::nullopt);
            continue;
        }
        const double iou = static_cast<double>(diag) / static_cast<double>(denom);
        r.per_class.emplace_back(iou);
        sum += iou;
        ++r.valid_classes;
    }
    if (r.valid_classes > 0) r.miou = sum / static_cast<double>(r.valid_classes);
    return r;
}

template <typename T>
std::vector<int> argmax_classes(const Tensor<T>& logits) {
    if (logits.rank() != 3) throw DimensionError("argmax: expected [K x h x w], got " + shape_to_string(logits.shape()));
    const std::size_t k = logits.dim(0), n = logits.dim(1) * logits.dim(2);
    const auto x = logits.data();
    std::vector<int> out(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        T best = x[p];
        for (std::size_t c = 1; c < k; ++c) {
            if (x[c * n + p] > best) {
                best = x[c * n + p];
                out[p] = static_cast<int>(c);
            }
        }
    }
    return out;
}

template std::vector<int> argmax_classes(const Tensor<float>&);
template std::vector<int> argmax_classes(const Tensor<double>&);

} // namespace dfv2
