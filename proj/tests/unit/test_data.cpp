#include <gtest/gtest.h>

#include <algorithm>

#include "dfv2/augment.hpp"
#include "dfv2/synth.hpp"

namespace dfv2 {
namespace {

double mean_depth_of(const RgbdSample& s, int k) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < s.labels.size(); ++p) {
        if (s.labels[p] == k) {
            sum += s.depth[p];
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

TEST(Synth, IsDeterministicPerSeed) {
    const auto a = synth_scene(17, 64, 64, 4);
    const auto b = synth_scene(17, 64, 64, 4);
    const auto c = synth_scene(18, 64, 64, 4);
    EXPECT_EQ(a.labels, b.labels);
    for (std::size_t i = 0; i < a.depth.numel(); ++i) ASSERT_EQ(a.depth[i], b.depth[i]);
    EXPECT_NE(a.labels, c.labels);
}

TEST(Synth, CollidingPairSharesColorButNotDepth) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = synth_scene(seed, 64, 64, 4);
        EXPECT_NO_THROW(s.validate(4));
        const std::size_t n = s.labels.size();
        std::vector<std::array<double, 3>> color(4, {-1, -1, -1});
        for (std::size_t p = 0; p < n; ++p) {
            auto& c = color[static_cast<std::size_t>(s.labels[p])];
            c = {s.rgb[p], s.rgb[n + p], s.rgb[2 * n + p]};
        }
        for (int k = 0; k < 4; ++k) ASSERT_GE(color[static_cast<std::size_t>(k)][0], 0.0) << "class " << k << " absent";
        EXPECT_EQ(color[2], color[3]);
        EXPECT_NE(color[1], color[2]);
        EXPECT_GT(mean_depth_of(s, 3) - mean_depth_of(s, 2), 1000.0);
    }
}

TEST(Synth, DepthIsIntegralAndInRange) {
    const auto s = synth_scene(3, 32, 96, 5);
    for (auto z : s.depth.data()) {
        EXPECT_EQ(z, std::round(z));
        EXPECT_GE(z, 0.0);
        EXPECT_LE(z, 65535.0);
    }
}

TEST(Synth, RejectsBadArguments) {
    EXPECT_THROW(synth_scene(0, 48, 64, 4), ShapeError);
    EXPECT_THROW(synth_scene(0, 64, 64, 1), ParameterError);
    EXPECT_EQ(synth_dataset(4, 3, 32, 32, 3).size(), 3u);
}

TEST(Augment, FlipTwiceIsIdentity) {
    const auto s = synth_scene(2, 32, 64, 4);
    const auto f = flip_horizontal(s);
    EXPECT_EQ(f.labels[0], s.labels[63]);
    EXPECT_EQ(f.depth.at(5, 0), s.depth.at(5, 63));
    const auto ff = flip_horizontal(f);
    EXPECT_EQ(ff.labels, s.labels);
    for (std::size_t i = 0; i < s.rgb.numel(); ++i) EXPECT_EQ(ff.rgb[i], s.rgb[i]);
}

TEST(Augment, UnitScaleWithoutFlipIsIdentity) {
    const auto s = synth_scene(4, 32, 32, 4);
    const auto a = augment_with(s, false, 1.0);
    EXPECT_EQ(a.labels, s.labels);
}

TEST(Augment, ShrinkPadsWithIgnoreAndKeepsSize) {
    const auto s = synth_scene(5, 64, 64, 4);
    const auto a = augment_with(s, false, 0.5);
    EXPECT_EQ(a.height(), 64u);
    EXPECT_EQ(a.width(), 64u);
    EXPECT_EQ(a.labels[0], kIgnoreIndex);
    EXPECT_NE(a.labels[32 * 64 + 32], kIgnoreIndex);
    EXPECT_NO_THROW(a.validate(4));
}

TEST(Augment, EnlargeCropsWithoutIgnore) {
    const auto s = synth_scene(6, 64, 64, 4);
    const auto a = augment_with(s, true, 1.75);
    EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), kIgnoreIndex), 0);
    EXPECT_NO_THROW(a.validate(4));
}

TEST(Augment, RandomDrawIsSeeded) {
    const auto s = synth_scene(7, 32, 32, 4);
    Rng r1(3), r2(3);
    EXPECT_EQ(augment(s, r1).labels, augment(s, r2).labels);
}

} // namespace
} // namespace dfv2
