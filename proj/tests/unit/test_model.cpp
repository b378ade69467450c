#include <gtest/gtest.h>

#include <set>

#include "dfv2/flops.hpp"
#include "dfv2/model.hpp"
#include "dfv2/synth.hpp"

namespace dfv2 {
namespace {

TEST(Model, ForwardShapes) {
    const auto model = SegmentationModel<float>::create(ModelConfig::nano(), 1);
    const auto scene = synth_scene(3, 64, 96, 4);
    Tape<float> tape(false);
    const auto rgb = tensor_cast<float>(scene.rgb);
    const auto depth = tensor_cast<float>(scene.depth);
    const auto feats = model.encode(tape, rgb, depth);
    const std::array<std::size_t, 4> stride{4, 8, 16, 32};
    for (std::size_t s = 0; s < kNumStages; ++s) {
        EXPECT_EQ(feats.grids[s], (GridShape{64 / stride[s], 96 / stride[s]}));
        EXPECT_EQ(feats.tokens[s].shape(), (Shape{feats.grids[s].tokens(), model.config().stage_dims[s]}));
    }
    EXPECT_EQ(model.forward(tape, rgb, depth).shape(), (Shape{4, 64, 96}));
}

TEST(Model, RejectsIndivisibleInput) {
    const auto model = SegmentationModel<float>::create(ModelConfig::tiny(), 1);
    Tape<float> tape(false);
    EXPECT_ANY_THROW(model.forward(tape, TensorF::zeros({3, 48, 64}), TensorF::zeros({48, 64})));
}

TEST(Model, ParameterCountMatchesAnalyticCount) {
    for (auto arm : {AblationArm::Vanilla, AblationArm::Both, AblationArm::BothAxial}) {
        for (auto fusion : {FusionMode::Memory, FusionMode::Conv}) {
            auto cfg = ModelConfig::nano();
            apply_arm(cfg, arm);
            if (arm != AblationArm::Vanilla) cfg.fusion = fusion;
            const auto model = SegmentationModel<float>::create(cfg, 2);
            EXPECT_EQ(model.parameter_count(), count_params(cfg).total);
        }
    }
}

TEST(Model, ParameterNamesAreUnique) {
    const auto model = SegmentationModel<double>::create(ModelConfig::nano(), 3);
    std::set<std::string> names;
    for (const auto& p : model.parameters()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
}

TEST(Model, SameSeedSameWeights) {
    const auto a = SegmentationModel<double>::create(ModelConfig::tiny(), 9);
    const auto b = SegmentationModel<double>::create(ModelConfig::tiny(), 9);
    const auto pa = a.parameters(), pb = b.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        ASSERT_EQ(pa[i].tensor.numel(), pb[i].tensor.numel());
        for (std::size_t j = 0; j < pa[i].tensor.numel(); ++j) EXPECT_EQ(pa[i].tensor[j], pb[i].tensor[j]);
    }
}

TEST(Model, ZeroResidualBlocksAreIdentity) {
    auto model = SegmentationModel<double>::create(ModelConfig::tiny(), 4);
    model.zero_residual_branches();
    Rng rng(5);
    const auto x = rng.uniform_tensor<double>({8 * 16, 8}, -1, 1);
    const auto priors = model.stage_priors(rng.uniform_tensor<double>({32, 64}, 500, 3000), 32, 64);
    Tape<double> tape(false);
    const auto y = gsa_block(tape, x, priors[0], model.stage_blocks(0)[0], model.stage_schedule(0));
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Model, LoadFromCopiesAcrossPrecision) {
    const auto wide = SegmentationModel<double>::create(ModelConfig::tiny(), 6);
    auto narrow = SegmentationModel<float>::create(ModelConfig::tiny(), 7);
    narrow.load_from(wide);
    const auto pw = wide.parameters();
    const auto pn = narrow.parameters();
    for (std::size_t i = 0; i < pw.size(); ++i)
        for (std::size_t j = 0; j < pw[i].tensor.numel(); ++j)
            EXPECT_EQ(pn[i].tensor[j], static_cast<float>(pw[i].tensor[j]));
}

TEST(Model, VanillaIgnoresDepth) {
    auto cfg = ModelConfig::tiny();
    apply_arm(cfg, AblationArm::Vanilla);
    const auto model = SegmentationModel<double>::create(cfg, 8);
    const auto scene = synth_scene(1, 32, 32, cfg.num_classes);
    Tape<double> tape(false);
    const auto a = model.forward(tape, scene.rgb, scene.depth);
    const auto b = model.forward(tape, scene.rgb, TensorD{});
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Flops, AttentionRatioIsExact) {
    for (const auto& [h, w] : {std::pair{60, 80}, std::pair{32, 32}, std::pair{7, 13}}) {
        const GridShape g{static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
        const auto full = attention_flops_full(g, 64);
        const auto axial = attention_flops_axial(g, 64);
        EXPECT_EQ(full, 4ull * g.tokens() * g.tokens() * 64);
        EXPECT_EQ(axial * g.tokens(), full * (g.rows + g.cols));
    }
    const double r = static_cast<double>(attention_flops_axial({60, 80}, 32)) /
                     static_cast<double>(attention_flops_full({60, 80}, 32));
    EXPECT_NEAR(r, 140.0 / 4800.0, 1e-15);
    EXPECT_NEAR(r, 0.0292, 5e-5);
}

TEST(Flops, EstimatePerStageRatio) {
    const auto cfg = ModelConfig::nano();
    const auto full = estimate_flops(cfg, 128, 128, FlopLayout::AllFull);
    const auto axial = estimate_flops(cfg, 128, 128, FlopLayout::AllAxial);
    const std::array<std::size_t, 4> side{32, 16, 8, 4};
    for (std::size_t s = 0; s < kNumStages; ++s) {
        EXPECT_EQ(axial.stage_attention[s] * side[s] * side[s], full.stage_attention[s] * 2 * side[s]);
    }
    EXPECT_LT(axial.total, full.total);
    const auto configured = estimate_flops(cfg, 128, 128);
    EXPECT_EQ(configured.stage_attention[0], axial.stage_attention[0]);
    EXPECT_EQ(configured.stage_attention[3], full.stage_attention[3]);
}

} // namespace
} // namespace dfv2
