#pragma once

#include "dfv2/decay.hpp"
#include "dfv2/geometry_prior.hpp"
#include "dfv2/random.hpp"

namespace dfv2 {

enum class AttentionLayout { Full, Axial };

inline constexpr double kProjectionInitStd = 0.02;

/// Row-stochastic attention weights softmax(Q K^T / sqrt(d)), multiplied
/// elementwise by beta^G when G is defined. No renormalization follows the
/// product, so rows sum to at most 1.
template <typename T>
Tensor<T> geo_attention_weights(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& g, T beta);

/// softmax(Q K^T / sqrt(d)) V
template <typename T>
Tensor<T> vanilla_attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v);

/// (softmax(Q K^T / sqrt(d)) (.) beta^G) V
template <typename T>
Tensor<T> gsa_full(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const Tensor<T>& g,
                   T beta);

/// Axially decomposed geometry attention over an H x W token grid.
///
/// Horizontal pass: each grid row attends over its own W tokens with weights
/// decayed by beta^gx, giving U. Vertical pass: each column attends over its
/// H tokens using the original queries/keys, decayed by beta^gy, and
/// aggregates U. q, k, v are [HW x d]; gx is [HW x W], gy is [HW x H]. Either
/// prior may be undefined, in which case that pass is undecayed.
template <typename T>
Tensor<T> gsa_axial(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, GridShape grid,
                    const Tensor<T>& gx, const Tensor<T>& gy, T beta);

template <typename T>
struct AttentionLayerWeights {
    Tensor<T> wq, wk, wv, wo;  // C x C, applied as x * W
    FusionMemory<T> fusion;
    std::size_t heads = 1;

    std::size_t channels() const { return wq.dim(0); }
    std::size_t head_dim() const { return channels() / heads; }

    static AttentionLayerWeights make(std::size_t channels, std::size_t heads, FusionMode fusion, Rng& rng);
};

/// Fused prior consumed by one attention layer. Undefined members mean "no decay".
template <typename T>
struct FusedPrior {
    Tensor<T> g;       // Full layout
    Tensor<T> gx, gy;  // Axial layout
};

/// Distance matrices computed once per encoder stage and shared by its blocks.
template <typename T>
struct StagePrior {
    GridShape grid;
    PriorTerms terms;
    FusionMode fusion = FusionMode::Memory;
    AttentionLayout layout = AttentionLayout::Full;
    Tensor<T> d, s;             // Full layout
    AxialDistances<T> axial;    // Axial layout

    /// `depth` may be null when terms.depth is false.
    static StagePrior build(GridShape grid, const DepthGrid<T>* depth, PriorTerms terms, FusionMode fusion,
                            AttentionLayout layout);
};

template <typename T>
FusedPrior<T> fuse_stage_prior(Tape<T>& tape, const StagePrior<T>& stage, const FusionMemory<T>& mem);

/// Multi-head geometry attention with per-head decay rates followed by the
/// output projection. x is [HW x C].
template <typename T>
Tensor<T> multi_head_gsa(Tape<T>& tape, const Tensor<T>& x, GridShape grid, const FusedPrior<T>& prior,
                         const AttentionLayerWeights<T>& w, const DecaySchedule& sched, AttentionLayout layout);

/// Convenience overload: fuses the stage distances with the layer's memory first.
template <typename T>
Tensor<T> multi_head_gsa(Tape<T>& tape, const Tensor<T>& x, const StagePrior<T>& stage,
                         const AttentionLayerWeights<T>& w, const DecaySchedule& sched);

} // namespace dfv2
