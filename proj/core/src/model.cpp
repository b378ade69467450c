#include "dfv2/model.hpp"

#include "dfv2/ops.hpp"

namespace dfv2 {

namespace {

constexpr double kInitStd = 0.02;
constexpr std::size_t kStemPatch = 4;

template <typename T>
ConvWeights<T> make_conv(Rng& rng, std::size_t cin, std::size_t cout) {
    return {rng.truncated_normal_tensor<T>({cout, cin, 3, 3}, kInitStd), Tensor<T>::zeros({cout}, true)};
}

template <typename T>
LinearWeights<T> make_linear(Rng& rng, std::size_t cin, std::size_t cout) {
    return {rng.truncated_normal_tensor<T>({cin, cout}, kInitStd), Tensor<T>::zeros({cout}, true)};
}

template <typename T>
NormWeights<T> make_norm(std::size_t c) {
    return {Tensor<T>::full({c}, T{1}, true), Tensor<T>::zeros({c}, true)};
}

/// Channel norm + GELU on an image, applied per pixel.
template <typename T>
Tensor<T> norm_act_image(Tape<T>& tape, const Tensor<T>& image, const NormWeights<T>& n, bool act) {
    const GridShape grid{image.dim(1), image.dim(2)};
    auto t = ops::layer_norm(tape, to_tokens(tape, image), n.gamma, n.shift);
    if (act) t = ops::gelu(tape, t);
    return to_image(tape, t, grid);
}

template <typename T>
void push_linear(std::vector<NamedTensor<T>>& out, const std::string& prefix, const LinearWeights<T>& l) {
    out.push_back({prefix + ".weight", l.w});
    out.push_back({prefix + ".bias", l.b});
}

template <typename T>
void push_conv(std::vector<NamedTensor<T>>& out, const std::string& prefix, const ConvWeights<T>& c) {
    out.push_back({prefix + ".weight", c.w});
    out.push_back({prefix + ".bias", c.b});
}

template <typename T>
void push_norm(std::vector<NamedTensor<T>>& out, const std::string& prefix, const NormWeights<T>& n) {
    out.push_back({prefix + ".gamma", n.gamma});
    out.push_back({prefix + ".shift", n.shift});
}

/// Fusion scalars that actually enter the prior for this config.
std::size_t fusion_param_count(const ModelConfig& c) {
    switch (c.fusion) {
    case FusionMode::Memory: return (c.priors.depth ? 1 : 0) + (c.priors.spatial ? 1 : 0);
    case FusionMode::Conv: return 3;
    case FusionMode::Addition:
    case FusionMode::Hadamard: return 0;
    }
    return 0;
}

} // namespace

template <typename T>
Tensor<T> to_tokens(Tape<T>& tape, const Tensor<T>& image) {
    if (image.rank() != 3) throw DimensionError("to_tokens: expected [C x H x W], got " + shape_to_string(image.shape()));
    const std::size_t c = image.dim(0), n = image.dim(1) * image.dim(2);
    return ops::transpose(tape, ops::reshape(tape, image, {c, n}));
}

template <typename T>
Tensor<T> to_image(Tape<T>& tape, const Tensor<T>& tokens, GridShape grid) {
    if (tokens.rank() != 2 || tokens.dim(0) != grid.tokens()) {
        throw DimensionError("to_image: tokens " + shape_to_string(tokens.shape()) + " do not cover a " +
                             std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " grid");
    }
    const std::size_t c = tokens.dim(1);
    return ops::reshape(tape, ops::transpose(tape, tokens), {c, grid.rows, grid.cols});
}

template <typename T>
Tensor<T> gsa_block(Tape<T>& tape, const Tensor<T>& x, const StagePrior<T>& prior, const BlockWeights<T>& w,
                    const DecaySchedule& sched) {
    auto h = ops::layer_norm(tape, x, w.norm1.gamma, w.norm1.shift);
    auto y = ops::add(tape, x, multi_head_gsa(tape, h, prior, w.attn, sched));
    auto f = ops::layer_norm(tape, y, w.norm2.gamma, w.norm2.shift);
    f = ops::linear(tape, ops::gelu(tape, ops::linear(tape, f, w.fc1.w, w.fc1.b)), w.fc2.w, w.fc2.b);
    return ops::add(tape, y, f);
}

template <typename T>
SegmentationModel<T> SegmentationModel<T>::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    SegmentationModel m;
    m.config_ = config;
    Rng rng(seed);
    const auto& dims = config.stage_dims;
    const std::size_t mid = dims[0] / 2;
    m.stem1_ = make_conv<T>(rng, 3, mid);
    m.stem_norm1_ = make_norm<T>(mid);
    m.stem2_ = make_conv<T>(rng, mid, dims[0]);
    m.stem_norm2_ = make_norm<T>(dims[0]);
    for (std::size_t s = 0; s < kNumStages; ++s) {
        if (s > 0) {
            m.down_[s] = make_conv<T>(rng, dims[s - 1], dims[s]);
            m.down_norm_[s] = make_norm<T>(dims[s]);
        }
        m.schedules_[s] = sample_decay_rates(config.decay, config.stage_heads[s]);
        for (std::size_t b = 0; b < config.stage_depths[s]; ++b) {
            BlockWeights<T> blk;
            blk.norm1 = make_norm<T>(dims[s]);
            blk.attn = AttentionLayerWeights<T>::make(dims[s], config.stage_heads[s], config.fusion, rng);
            blk.norm2 = make_norm<T>(dims[s]);
            blk.fc1 = make_linear<T>(rng, dims[s], config.ffn_hidden(s));
            blk.fc2 = make_linear<T>(rng, config.ffn_hidden(s), dims[s]);
            m.blocks_[s].push_back(std::move(blk));
        }
    }
    for (std::size_t s = 1; s < kNumStages; ++s) m.proj_[s] = make_linear<T>(rng, dims[s], config.decoder_dim);
    m.fuse_ = make_linear<T>(rng, 3 * config.decoder_dim, config.decoder_dim);
    m.classifier_ = make_linear<T>(rng, config.decoder_dim, config.num_classes);
    return m;
}

template <typename T>
Tensor<T> SegmentationModel<T>::stem(Tape<T>& tape, const Tensor<T>& rgb) const {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) {
        throw DimensionError("stem: expected [3 x h x w] rgb, got " + shape_to_string(rgb.shape()));
    }
    if (rgb.dim(1) % kStemPatch != 0 || rgb.dim(2) % kStemPatch != 0) {
        throw ShapeError("stem: input " + shape_to_string(rgb.shape()) + " is not divisible by 4");
    }
    auto x = ops::conv2d(tape, rgb, stem1_.w, stem1_.b, 2, 1);
    x = norm_act_image(tape, x, stem_norm1_, true);
    x = ops::conv2d(tape, x, stem2_.w, stem2_.b, 2, 1);
    return norm_act_image(tape, x, stem_norm2_, true);
}

template <typename T>
std::array<StagePrior<T>, kNumStages> SegmentationModel<T>::stage_priors(const Tensor<T>& depth, std::size_t h,
                                                                          std::size_t w) const {
    std::array<StagePrior<T>, kNumStages> out;
    Tensor<T> norm;
    if (config_.priors.depth) {
        if (!depth.defined() || depth.rank() != 2 || depth.dim(0) != h || depth.dim(1) != w) {
            throw DimensionError("encoder: depth must be [" + std::to_string(h) + "x" + std::to_string(w) + "], got " +
                                 (depth.defined() ? shape_to_string(depth.shape()) : std::string("none")));
        }
        norm = normalize_depth(depth);
    }
    std::size_t patch = kStemPatch;
    for (std::size_t s = 0; s < kNumStages; ++s, patch *= 2) {
        const GridShape grid{h / patch, w / patch};
        DepthGrid<T> dg;
        if (config_.priors.depth) dg = pool_depth_to_grid(norm, patch);
        out[s] = StagePrior<T>::build(grid, config_.priors.depth ? &dg : nullptr, config_.priors, config_.fusion,
                                      config_.stage_layout(s));
    }
    return out;
}

template <typename T>
StageFeatures<T> SegmentationModel<T>::encode(Tape<T>& tape, const Tensor<T>& rgb, const Tensor<T>& depth) const {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) {
        throw DimensionError("encoder: expected [3 x h x w] rgb, got " + shape_to_string(rgb.shape()));
    }
    const std::size_t h = rgb.dim(1), w = rgb.dim(2);
    if (h % kInputDivisor != 0 || w % kInputDivisor != 0) {
        throw ShapeError("encoder: input " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by 32");
    }
    const auto priors = stage_priors(depth, h, w);
    StageFeatures<T> feats;
    auto image = stem(tape, rgb);
    for (std::size_t s = 0; s < kNumStages; ++s) {
        if (s > 0) {
            image = ops::conv2d(tape, image, down_[s].w, down_[s].b, 2, 1);
            image = norm_act_image(tape, image, down_norm_[s], false);
        }
        const GridShape grid{image.dim(1), image.dim(2)};
        auto x = to_tokens(tape, image);
        for (const auto& blk : blocks_[s]) x = gsa_block(tape, x, priors[s], blk, schedules_[s]);
        feats.tokens[s] = x;
        feats.grids[s] = grid;
        image = to_image(tape, x, grid);
    }
    return feats;
}

template <typename T>
Tensor<T> SegmentationModel<T>::decode(Tape<T>& tape, const StageFeatures<T>& feats, std::size_t out_h,
                                       std::size_t out_w) const {
    const GridShape target = feats.grids[1];
    std::vector<Tensor<T>> maps;
    for (std::size_t s = 1; s < kNumStages; ++s) {
        auto p = to_image(tape, ops::linear(tape, feats.tokens[s], proj_[s].w, proj_[s].b), feats.grids[s]);
        if (feats.grids[s] != target) p = ops::upsample_bilinear(tape, p, target.rows, target.cols);
        maps.push_back(p);
    }
    auto fused = to_tokens(tape, ops::concat_rows(tape, maps));
    fused = ops::gelu(tape, ops::linear(tape, fused, fuse_.w, fuse_.b));
    auto logits = to_image(tape, ops::linear(tape, fused, classifier_.w, classifier_.b), target);
    return ops::upsample_bilinear(tape, logits, out_h, out_w);
}

template <typename T>
Tensor<T> SegmentationModel<T>::forward(Tape<T>& tape, const Tensor<T>& rgb, const Tensor<T>& depth) const {
    const auto feats = encode(tape, rgb, depth);
    return decode(tape, feats, rgb.dim(1), rgb.dim(2));
}

template <typename T>
std::vector<NamedTensor<T>> SegmentationModel<T>::parameters() const {
    std::vector<NamedTensor<T>> out;
    push_conv(out, "stem.conv1", stem1_);
    push_norm(out, "stem.norm1", stem_norm1_);
    push_conv(out, "stem.conv2", stem2_);
    push_norm(out, "stem.norm2", stem_norm2_);
    for (std::size_t s = 0; s < kNumStages; ++s) {
        const std::string stage = "stage" + std::to_string(s);
        if (s > 0) {
            push_conv(out, stage + ".down", down_[s]);
            push_norm(out, stage + ".down_norm", down_norm_[s]);
        }
        for (std::size_t b = 0; b < blocks_[s].size(); ++b) {
            const auto& blk = blocks_[s][b];
            const std::string p = stage + ".block" + std::to_string(b);
            push_norm(out, p + ".norm1", blk.norm1);
            out.push_back({p + ".attn.wq", blk.attn.wq});
            out.push_back({p + ".attn.wk", blk.attn.wk});
            out.push_back({p + ".attn.wv", blk.attn.wv});
            out.push_back({p + ".attn.wo", blk.attn.wo});
            const auto& mem = blk.attn.fusion;
            if (config_.fusion == FusionMode::Conv) {
                out.push_back({p + ".attn.fusion.w_depth", mem.w_depth});
                out.push_back({p + ".attn.fusion.w_spatial", mem.w_spatial});
                out.push_back({p + ".attn.fusion.bias", mem.bias});
            } else if (config_.fusion == FusionMode::Memory) {
                if (config_.priors.depth) out.push_back({p + ".attn.fusion.w_depth", mem.w_depth});
                if (config_.priors.spatial) out.push_back({p + ".attn.fusion.w_spatial", mem.w_spatial});
            }
            push_norm(out, p + ".norm2", blk.norm2);
            push_linear(out, p + ".ffn.fc1", blk.fc1);
            push_linear(out, p + ".ffn.fc2", blk.fc2);
        }
    }
    for (std::size_t s = 1; s < kNumStages; ++s) push_linear(out, "decoder.proj" + std::to_string(s), proj_[s]);
    push_linear(out, "decoder.fuse", fuse_);
    push_linear(out, "decoder.classifier", classifier_);
    return out;
}

template <typename T>
std::size_t SegmentationModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
}

template <typename T>
void SegmentationModel<T>::zero_residual_branches() {
    for (auto& stage : blocks_) {
        for (auto& blk : stage) {
            for (auto& v : blk.attn.wo.mutable_data()) v = T{0};
            for (auto& v : blk.fc2.w.mutable_data()) v = T{0};
            for (auto& v : blk.fc2.b.mutable_data()) v = T{0};
        }
    }
}

ParamReport count_params(const ModelConfig& c) {
    c.validate();
    ParamReport r;
    const auto conv = [](std::size_t cin, std::size_t cout) { return 9 * cin * cout + cout; };
    const auto lin = [](std::size_t cin, std::size_t cout) { return cin * cout + cout; };
    const auto norm = [](std::size_t ch) { return 2 * ch; };
    const std::size_t mid = c.stage_dims[0] / 2;
    r.items.push_back({"stem", conv(3, mid) + norm(mid) + conv(mid, c.stage_dims[0]) + norm(c.stage_dims[0])});
    for (std::size_t s = 0; s < kNumStages; ++s) {
        const std::size_t ch = c.stage_dims[s], hid = c.ffn_hidden(s);
        if (s > 0) {
            r.items.push_back({"stage" + std::to_string(s) + ".down", conv(c.stage_dims[s - 1], ch) + norm(ch)});
        }
        const std::size_t attn = 4 * ch * ch + fusion_param_count(c);
        const std::size_t block = norm(ch) + attn + norm(ch) + lin(ch, hid) + lin(hid, ch);
        r.items.push_back({"stage" + std::to_string(s) + ".blocks", c.stage_depths[s] * block});
    }
    std::size_t dec = lin(3 * c.decoder_dim, c.decoder_dim) + lin(c.decoder_dim, c.num_classes);
    for (std::size_t s = 1; s < kNumStages; ++s) dec += lin(c.stage_dims[s], c.decoder_dim);
    r.items.push_back({"decoder", dec});
    for (const auto& it : r.items) r.total += it.count;
    return r;
}

#define DFV2_INSTANTIATE_MODEL(T)                                                                    \
    template Tensor<T> to_tokens(Tape<T>&, const Tensor<T>&);                                        \
    template Tensor<T> to_image(Tape<T>&, const Tensor<T>&, GridShape);                              \
    template Tensor<T> gsa_block(Tape<T>&, const Tensor<T>&, const StagePrior<T>&, const BlockWeights<T>&, \
                                 const DecaySchedule&);                                              \
    template class SegmentationModel<T>;

DFV2_INSTANTIATE_MODEL(float)
DFV2_INSTANTIATE_MODEL(double)

#undef DFV2_INSTANTIATE_MODEL

} // namespace dfv2
