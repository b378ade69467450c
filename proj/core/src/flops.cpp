#include "dfv2/flops.hpp"

namespace dfv2 {

std::uint64_t attention_flops_full(GridShape grid, std::size_t dim) {
    const std::uint64_t n = grid.tokens();
    return 2 * (2 * n * n * dim);
}

std::uint64_t attention_flops_axial(GridShape grid, std::size_t dim) {
    const std::uint64_t n = grid.tokens();
    return 2 * (2 * n * (grid.rows + grid.cols) * dim);
}

FlopReport estimate_flops(const ModelConfig& c, std::size_t h, std::size_t w, FlopLayout layout) {
    c.validate();
    if (h % kInputDivisor != 0 || w % kInputDivisor != 0) {
        throw ShapeError("estimate_flops: input " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by 32");
    }
    FlopReport r;
    const auto add = [&r](std::string layer, std::string kind, std::uint64_t flops) {
        r.entries.push_back({std::move(layer), std::move(kind), flops});
        r.total += flops;
    };
    const auto conv = [](std::size_t cin, std::size_t cout, GridShape out) {
        return std::uint64_t{2} * cout * cin * 9 * out.tokens();
    };
    const auto lin = [](std::size_t n, std::size_t cin, std::size_t cout) {
        return std::uint64_t{2} * n * cin * cout;
    };
    const std::size_t mid = c.stage_dims[0] / 2;
    add("stem.conv1", "conv", conv(3, mid, {h / 2, w / 2}));
    add("stem.conv2", "conv", conv(mid, c.stage_dims[0], {h / 4, w / 4}));
    std::array<GridShape, kNumStages> grids{};
    for (std::size_t s = 0; s < kNumStages; ++s) {
        const GridShape g{h / (4u << s), w / (4u << s)};
        grids[s] = g;
        const std::size_t ch = c.stage_dims[s], n = g.tokens();
        const std::string stage = "stage" + std::to_string(s);
        if (s > 0) add(stage + ".down", "conv", conv(c.stage_dims[s - 1], ch, g));
        bool axial = c.stage_layout(s) == AttentionLayout::Axial;
        if (layout == FlopLayout::AllFull) axial = false;
        if (layout == FlopLayout::AllAxial) axial = true;
        for (std::size_t b = 0; b < c.stage_depths[s]; ++b) {
            const std::string p = stage + ".block" + std::to_string(b);
            add(p + ".attn.qkvo", "linear", 4 * lin(n, ch, ch));
            const std::uint64_t a = axial ? attention_flops_axial(g, ch) : attention_flops_full(g, ch);
            add(p + (axial ? ".attn.axial" : ".attn.full"), "attention", a);
            r.stage_attention[s] += a;
            r.attention += a;
            add(p + ".ffn", "linear", lin(n, ch, c.ffn_hidden(s)) + lin(n, c.ffn_hidden(s), ch));
        }
    }
    for (std::size_t s = 1; s < kNumStages; ++s) {
        add("decoder.proj" + std::to_string(s), "linear", lin(grids[s].tokens(), c.stage_dims[s], c.decoder_dim));
    }
    add("decoder.fuse", "linear", lin(grids[1].tokens(), 3 * c.decoder_dim, c.decoder_dim));
    add("decoder.classifier", "linear", lin(grids[1].tokens(), c.decoder_dim, c.num_classes));
    return r;
}

} // namespace dfv2
