#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dfv2/dataset.hpp"
#include "dfv2/metrics.hpp"
#include "dfv2/model.hpp"

namespace dfv2 {

struct EvalResult {
    ConfusionMatrix confusion{1};
    MiouResult miou;
};

/// Single-scale evaluation: argmax of the logits against each sample's labels.
template <typename T>
EvalResult evaluate(const SegmentationModel<T>& model, const std::vector<RgbdSample>& samples);

/// Per-sample loss and gradient accumulation into the model's parameters.
/// Returns the loss; gradients are scaled by `weight`.
template <typename T>
double accumulate_sample_gradient(const SegmentationModel<T>& model, const RgbdSample& sample, double weight);

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(const std::vector<NamedTensor<T>>& params, double max_norm);

struct TrainLogEntry {
    std::size_t step = 0;
    double loss = 0.0;  // mean over the batch
    double lr = 0.0;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
    double final_loss = 0.0;  // last step's batch loss; 0 when no step ran
    EvalResult validation;
    double train_seconds = 0.0;
};

/// The synthetic train/validation split used for a training seed. Both splits
/// depend only on (seed, sizes), so different arms see identical data.
struct ToySplit {
    std::vector<RgbdSample> train, val;
};
ToySplit make_toy_split(const RunConfig& config, std::uint64_t seed);

using TrainLogFn = std::function<void(const TrainLogEntry&)>;

/// AdamW with poly learning-rate decay and cross-entropy (ignore index 255).
/// Batches are drawn by reshuffling the training set every epoch. Throws
/// DivergenceError when the loss becomes non-finite.
template <typename T>
TrainResult train_model(SegmentationModel<T>& model, const RunConfig& config, const ToySplit& data,
                        std::uint64_t seed, const TrainLogFn& on_log = {});

} // namespace dfv2
