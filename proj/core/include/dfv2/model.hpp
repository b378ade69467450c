#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfv2/attention.hpp"
#include "dfv2/model_config.hpp"

namespace dfv2 {

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
};

template <typename T>
struct LinearWeights {
    Tensor<T> w;  // Cin x Cout
    Tensor<T> b;  // Cout
};

template <typename T>
struct NormWeights {
    Tensor<T> gamma, shift;  // C
};

template <typename T>
struct ConvWeights {
    Tensor<T> w;  // Cout x Cin x 3 x 3
    Tensor<T> b;  // Cout
};

template <typename T>
struct BlockWeights {
    NormWeights<T> norm1;
    AttentionLayerWeights<T> attn;
    NormWeights<T> norm2;
    LinearWeights<T> fc1, fc2;
};

/// Token-layout features: tokens[s] is [H_s W_s x C_s] over grids[s].
template <typename T>
struct StageFeatures {
    std::array<Tensor<T>, kNumStages> tokens;
    std::array<GridShape, kNumStages> grids;
};

/// [C x H x W] -> [HW x C]
template <typename T>
Tensor<T> to_tokens(Tape<T>& tape, const Tensor<T>& image);

/// [HW x C] -> [C x H x W]
template <typename T>
Tensor<T> to_image(Tape<T>& tape, const Tensor<T>& tokens, GridShape grid);

/// Pre-norm residual block: x + GSA(LN(x)), then + FFN(LN(.)).
template <typename T>
Tensor<T> gsa_block(Tape<T>& tape, const Tensor<T>& x, const StagePrior<T>& prior, const BlockWeights<T>& w,
                    const DecaySchedule& sched);

template <typename T>
class SegmentationModel {
public:
    /// Validates the config and initializes weights: truncated normal (0.02)
    /// for conv/linear weights, zero biases, unit norm gains.
    static SegmentationModel create(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }

    /// rgb [3 x h x w] -> [C0 x h/4 x w/4]
    Tensor<T> stem(Tape<T>& tape, const Tensor<T>& rgb) const;

    /// Per-stage priors from a raw depth map. `depth` is ignored (may be
    /// undefined) when the config does not use the depth term.
    std::array<StagePrior<T>, kNumStages> stage_priors(const Tensor<T>& depth, std::size_t h, std::size_t w) const;

    StageFeatures<T> encode(Tape<T>& tape, const Tensor<T>& rgb, const Tensor<T>& depth) const;

    /// Logits [K x out_h x out_w] from stages 1-3.
    Tensor<T> decode(Tape<T>& tape, const StageFeatures<T>& feats, std::size_t out_h, std::size_t out_w) const;

    Tensor<T> forward(Tape<T>& tape, const Tensor<T>& rgb, const Tensor<T>& depth) const;

    /// Every learnable tensor with a stable hierarchical name.
    std::vector<NamedTensor<T>> parameters() const;
    std::size_t parameter_count() const;

    /// Copies values by name from a model of the same config (any precision).
    template <typename U>
    void load_from(const SegmentationModel<U>& other);

    /// Zeroes every block's attention output and FFN down projection.
    void zero_residual_branches();

    const std::vector<BlockWeights<T>>& stage_blocks(std::size_t stage) const { return blocks_[stage]; }
    const DecaySchedule& stage_schedule(std::size_t stage) const { return schedules_[stage]; }

private:
    ModelConfig config_;
    ConvWeights<T> stem1_, stem2_;
    NormWeights<T> stem_norm1_, stem_norm2_;
    std::array<ConvWeights<T>, kNumStages> down_;  // index 0 unused
    std::array<NormWeights<T>, kNumStages> down_norm_;
    std::array<std::vector<BlockWeights<T>>, kNumStages> blocks_;
    std::array<DecaySchedule, kNumStages> schedules_;
    std::array<LinearWeights<T>, kNumStages> proj_;  // index 0 unused
    LinearWeights<T> fuse_, classifier_;
};

/// Analytic learnable-scalar count with a per-module breakdown.
struct ParamReport {
    struct Item {
        std::string module;
        std::size_t count = 0;
    };
    std::vector<Item> items;
    std::size_t total = 0;
};

ParamReport count_params(const ModelConfig& config);

template <typename T>
template <typename U>
void SegmentationModel<T>::load_from(const SegmentationModel<U>& other) {
    if (!(other.config() == config_)) throw UsageError("load_from: model configs differ");
    auto dst = parameters();
    auto src = other.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        auto out = dst[i].tensor.mutable_data();
        auto in = src[i].tensor.data();
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<T>(in[j]);
    }
}

extern template class SegmentationModel<float>;
extern template class SegmentationModel<double>;

} // namespace dfv2
