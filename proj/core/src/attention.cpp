#include "dfv2/attention.hpp"

#include <cmath>

#include "dfv2/ops.hpp"

namespace dfv2 {

namespace {

template <typename T>
void require_tokens(const Tensor<T>& t, std::size_t n, std::size_t d, const char* name, const char* op) {
    if (t.rank() != 2 || t.dim(0) != n || t.dim(1) != d) {
        throw DimensionError(std::string(op) + ": " + name + " has shape " + shape_to_string(t.shape()) +
                             ", expected " + shape_to_string({n, d}));
    }
}

template <typename T>
T score_scale(std::size_t d) {
    return T{1} / std::sqrt(static_cast<T>(d));
}

} // namespace

template <typename T>
Tensor<T> geo_attention_weights(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& g, T beta) {
    if (q.rank() != 2) throw DimensionError("attention: queries must be [N x d], got " + shape_to_string(q.shape()));
    const std::size_t n = q.dim(0), d = q.dim(1);
    require_tokens(k, n, d, "keys", "attention");
    auto scores = ops::scale(tape, ops::matmul(tape, q, ops::transpose(tape, k)), score_scale<T>(d));
    auto weights = ops::softmax_rows(tape, scores);
    if (!g.defined()) return weights;
    require_tokens(g, n, n, "geometry prior", "attention");
    return ops::mul(tape, weights, ops::exp_decay(tape, g, beta));
}

template <typename T>
Tensor<T> vanilla_attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
    if (v.rank() != 2 || v.dim(0) != q.dim(0)) {
        throw DimensionError("attention: values " + shape_to_string(v.shape()) + " do not match queries " +
                             shape_to_string(q.shape()));
    }
    return ops::matmul(tape, geo_attention_weights(tape, q, k, Tensor<T>{}, T{1}), v);
}

template <typename T>
Tensor<T> gsa_full(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const Tensor<T>& g,
                   T beta) {
    if (v.rank() != 2 || v.dim(0) != q.dim(0)) {
        throw DimensionError("gsa_full: values " + shape_to_string(v.shape()) + " do not match queries " +
                             shape_to_string(q.shape()));
    }
    return ops::matmul(tape, geo_attention_weights(tape, q, k, g, beta), v);
}

template <typename T>
Tensor<T> gsa_axial(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, GridShape grid,
                    const Tensor<T>& gx, const Tensor<T>& gy, T beta) {
    const std::size_t H = grid.rows, W = grid.cols, n = grid.tokens();
    if (q.rank() != 2) throw DimensionError("gsa_axial: queries must be [HW x d], got " + shape_to_string(q.shape()));
    const std::size_t d = q.dim(1);
    require_tokens(q, n, d, "queries", "gsa_axial");
    require_tokens(k, n, d, "keys", "gsa_axial");
    if (v.rank() != 2 || v.dim(0) != n) {
        throw DimensionError("gsa_axial: values " + shape_to_string(v.shape()) + " do not match a " +
                             std::to_string(H) + "x" + std::to_string(W) + " grid");
    }
    if (gx.defined()) require_tokens(gx, n, W, "horizontal prior", "gsa_axial");
    if (gy.defined()) require_tokens(gy, n, H, "vertical prior", "gsa_axial");
    const std::size_t dv = v.dim(1);
    const T sc = score_scale<T>(d);

    // Horizontal pass: batch over grid rows.
    auto qr = ops::reshape(tape, q, {H, W, d});
    auto kr = ops::reshape(tape, k, {H, W, d});
    auto vr = ops::reshape(tape, v, {H, W, dv});
    auto ax = ops::softmax_rows(tape, ops::scale(tape, ops::bmm(tape, qr, kr, true), sc));
    if (gx.defined()) ax = ops::mul(tape, ax, ops::exp_decay(tape, ops::reshape(tape, gx, {H, W, W}), beta));
    auto u = ops::bmm(tape, ax, vr);  // H x W x dv

    // Vertical pass: batch over grid columns.
    auto qc = ops::swap_leading(tape, qr);
    auto kc = ops::swap_leading(tape, kr);
    auto uc = ops::swap_leading(tape, u);
    auto ay = ops::softmax_rows(tape, ops::scale(tape, ops::bmm(tape, qc, kc, true), sc));
    if (gy.defined()) {
        auto gyc = ops::swap_leading(tape, ops::reshape(tape, gy, {H, W, H}));  // W x H x H
        ay = ops::mul(tape, ay, ops::exp_decay(tape, gyc, beta));
    }
    auto out = ops::bmm(tape, ay, uc);  // W x H x dv
    return ops::reshape(tape, ops::swap_leading(tape, out), {n, dv});
}

template <typename T>
AttentionLayerWeights<T> AttentionLayerWeights<T>::make(std::size_t channels, std::size_t heads, FusionMode fusion,
                                                        Rng& rng) {
    if (heads == 0 || channels % heads != 0) {
        throw ParameterError("attention: " + std::to_string(channels) + " channels not divisible by " +
                             std::to_string(heads) + " heads");
    }
    AttentionLayerWeights w;
    w.wq = rng.truncated_normal_tensor<T>({channels, channels}, kProjectionInitStd);
    w.wk = rng.truncated_normal_tensor<T>({channels, channels}, kProjectionInitStd);
    w.wv = rng.truncated_normal_tensor<T>({channels, channels}, kProjectionInitStd);
    w.wo = rng.truncated_normal_tensor<T>({channels, channels}, kProjectionInitStd);
    w.fusion = FusionMemory<T>::make(fusion);
    w.heads = heads;
    return w;
}

template <typename T>
StagePrior<T> StagePrior<T>::build(GridShape grid, const DepthGrid<T>* depth, PriorTerms terms, FusionMode fusion,
                                   AttentionLayout layout) {
    if (terms.depth && depth == nullptr) throw UsageError("stage prior: depth term requested without a depth grid");
    if (depth != nullptr && depth->grid != grid) {
        throw DimensionError("stage prior: depth grid " + std::to_string(depth->grid.rows) + "x" +
                             std::to_string(depth->grid.cols) + " does not match token grid " +
                             std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
    }
    StagePrior p;
    p.grid = grid;
    p.terms = terms;
    p.fusion = fusion;
    p.layout = layout;
    if (!terms.any()) return p;
    if (layout == AttentionLayout::Full) {
        if (terms.depth) p.d = depth_distance_matrix(*depth);
        p.s = spatial_distance_matrix<T>(grid.rows, grid.cols);
    } else {
        p.axial = terms.depth ? axial_distances(*depth) : axial_distances<T>(grid);
    }
    return p;
}

template <typename T>
FusedPrior<T> fuse_stage_prior(Tape<T>& tape, const StagePrior<T>& stage, const FusionMemory<T>& mem) {
    FusedPrior<T> out;
    if (!stage.terms.any()) return out;
    if (stage.layout == AttentionLayout::Full) {
        out.g = fuse_priors(tape, stage.d, stage.s, mem, stage.fusion, stage.terms);
    } else {
        auto ax = axial_priors(tape, stage.axial, mem, stage.fusion, stage.terms);
        out.gx = ax.gx;
        out.gy = ax.gy;
    }
    return out;
}

template <typename T>
Tensor<T> multi_head_gsa(Tape<T>& tape, const Tensor<T>& x, GridShape grid, const FusedPrior<T>& prior,
                         const AttentionLayerWeights<T>& w, const DecaySchedule& sched, AttentionLayout layout) {
    const std::size_t c = w.channels();
    if (x.rank() != 2 || x.dim(0) != grid.tokens() || x.dim(1) != c) {
        throw DimensionError("multi_head_gsa: input " + shape_to_string(x.shape()) + " does not match " +
                             std::to_string(grid.tokens()) + " tokens x " + std::to_string(c) + " channels");
    }
    if (sched.heads() != w.heads) {
        throw DimensionError("multi_head_gsa: decay schedule has " + std::to_string(sched.heads()) +
                             " rates for " + std::to_string(w.heads) + " heads");
    }
    const std::size_t hd = w.head_dim();
    auto q = ops::matmul(tape, x, w.wq);
    auto k = ops::matmul(tape, x, w.wk);
    auto v = ops::matmul(tape, x, w.wv);
    std::vector<Tensor<T>> heads;
    heads.reserve(w.heads);
    for (std::size_t h = 0; h < w.heads; ++h) {
        const T beta = static_cast<T>(sched.rates[h]);
        auto qh = w.heads == 1 ? q : ops::slice_cols(tape, q, h * hd, hd);
        auto kh = w.heads == 1 ? k : ops::slice_cols(tape, k, h * hd, hd);
        auto vh = w.heads == 1 ? v : ops::slice_cols(tape, v, h * hd, hd);
        if (layout == AttentionLayout::Full) {
            heads.push_back(gsa_full(tape, qh, kh, vh, prior.g, beta));
        } else {
            heads.push_back(gsa_axial(tape, qh, kh, vh, grid, prior.gx, prior.gy, beta));
        }
    }
    auto merged = w.heads == 1 ? heads.front() : ops::concat_cols(tape, heads);
    return ops::matmul(tape, merged, w.wo);
}

template <typename T>
Tensor<T> multi_head_gsa(Tape<T>& tape, const Tensor<T>& x, const StagePrior<T>& stage,
                         const AttentionLayerWeights<T>& w, const DecaySchedule& sched) {
    return multi_head_gsa(tape, x, stage.grid, fuse_stage_prior(tape, stage, w.fusion), w, sched, stage.layout);
}

#define DFV2_INSTANTIATE_ATTN(T)                                                                              \
    template Tensor<T> geo_attention_weights(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
    template Tensor<T> vanilla_attention(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
    template Tensor<T> gsa_full(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                const Tensor<T>&, T);                                                         \
    template Tensor<T> gsa_axial(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, GridShape,   \
                                 const Tensor<T>&, const Tensor<T>&, T);                                      \
    template struct AttentionLayerWeights<T>;                                                                 \
    template struct StagePrior<T>;                                                                            \
    template FusedPrior<T> fuse_stage_prior(Tape<T>&, const StagePrior<T>&, const FusionMemory<T>&);          \
    template Tensor<T> multi_head_gsa(Tape<T>&, const Tensor<T>&, GridShape, const FusedPrior<T>&,            \
                                      const AttentionLayerWeights<T>&, const DecaySchedule&, AttentionLayout); \
    template Tensor<T> multi_head_gsa(Tape<T>&, const Tensor<T>&, const StagePrior<T>&,                       \
                                      const AttentionLayerWeights<T>&, const DecaySchedule&);

DFV2_INSTANTIATE_ATTN(float)
DFV2_INSTANTIATE_ATTN(double)

#undef DFV2_INSTANTIATE_ATTN

} // namespace dfv2
