#include <gtest/gtest.h>

#include <cmath>

#include "dfv2/geometry_prior.hpp"
#include "dfv2/random.hpp"
#include "oracles.hpp"

namespace dfv2 {
namespace {

DepthGrid<double> random_grid(Rng& rng, std::size_t rows, std::size_t cols) {
    return {{rows, cols}, rng.uniform_tensor<double>({rows, cols}, 0, 1)};
}

TEST(GeometryPrior, DistancesMatchBruteForce) {
    Rng rng(11);
    const auto grid = random_grid(rng, 3, 5);
    const auto d = depth_distance_matrix(grid);
    const auto s = spatial_distance_matrix<double>(3, 5);
    const auto d_ref = oracle::depth_distance(grid.z);
    const auto s_ref = oracle::spatial_distance(3, 5);
    ASSERT_EQ(d.shape(), (Shape{15, 15}));
    for (std::size_t i = 0; i < 225; ++i) {
        EXPECT_EQ(d[i], d_ref[i]);
        EXPECT_EQ(s[i], s_ref[i]);
    }
}

TEST(GeometryPrior, SpatialDistanceIsManhattan) {
    const auto s = spatial_distance_matrix<double>(3, 4);
    // token 0 is (0,0); token 11 is (2,3)
    EXPECT_EQ(s.at(0, 11), 5.0);
    EXPECT_EQ(s.at(11, 0), 5.0);
    EXPECT_EQ(s.at(5, 5), 0.0);
}

TEST(GeometryPrior, FusionModesFollowTheirDefinitions) {
    Rng rng(12);
    const auto grid = random_grid(rng, 2, 3);
    const auto d = depth_distance_matrix(grid);
    const auto s = spatial_distance_matrix<double>(2, 3);
    Tape<double> tape(false);

    auto mem = FusionMemory<double>::make(FusionMode::Memory, -2.0, 0.5);
    const auto g_mem = fuse_priors(tape, d, s, mem, FusionMode::Memory);
    const auto g_add = fuse_priors(tape, d, s, mem, FusionMode::Addition);
    const auto g_had = fuse_priors(tape, d, s, mem, FusionMode::Hadamard);
    auto conv = FusionMemory<double>::make(FusionMode::Conv, 0.7, -0.3);
    conv.bias.mutable_data()[0] = 0.2;
    const auto g_conv = fuse_priors(tape, d, s, conv, FusionMode::Conv);
    for (std::size_t p = 0; p < 6; ++p) {
        for (std::size_t q = 0; q < 6; ++q) {
            const double dv = d.at(p, q), sv = s.at(p, q);
            EXPECT_NEAR(g_mem.at(p, q), 2.0 * dv + 0.5 * sv, 1e-15);
            EXPECT_NEAR(g_add.at(p, q), dv + sv, 1e-15);
            EXPECT_NEAR(g_had.at(p, q), dv * sv, 1e-15);
            const double pre = 0.7 * dv - 0.3 * sv + (p != q ? 0.2 : 0.0);
            EXPECT_NEAR(g_conv.at(p, q), std::max(0.0, pre), 1e-15);
        }
    }
}

TEST(GeometryPrior, DisabledTermsDropOut) {
    Rng rng(13);
    const auto grid = random_grid(rng, 2, 2);
    const auto d = depth_distance_matrix(grid);
    const auto s = spatial_distance_matrix<double>(2, 2);
    const auto mem = FusionMemory<double>::make(FusionMode::Memory);
    Tape<double> tape(false);
    const auto depth_only = fuse_priors(tape, d, s, mem, FusionMode::Memory, {true, false});
    const auto spatial_only = fuse_priors(tape, TensorD{}, s, mem, FusionMode::Memory, {false, true});
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_NEAR(depth_only[i], d[i], 1e-15);
        EXPECT_NEAR(spatial_only[i], kInitSpatialWeight * s[i], 1e-15);
    }
    EXPECT_FALSE(fuse_priors(tape, d, s, mem, FusionMode::Memory, {false, false}).defined());
}

TEST(GeometryPrior, AxialPriorsAreSlicesOfTheFullPrior) {
    Rng rng(14);
    for (const auto mode : {FusionMode::Memory, FusionMode::Addition, FusionMode::Hadamard, FusionMode::Conv}) {
        const auto grid = random_grid(rng, 4, 6);
        const auto prior = build_geometry_prior(grid, FusionMemory<double>::make(mode), mode);
        for (std::size_t p = 0; p < 24; ++p) {
            const std::size_t i = p / 6, j = p % 6;
            for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(prior.gx.at(p, c), prior.g.at(p, i * 6 + c), 1e-12);
            for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(prior.gy.at(p, r), prior.g.at(p, r * 6 + j), 1e-12);
        }
    }
}

TEST(GeometryPrior, NormalizeDepthMapsToUnitRange) {
    const auto z = normalize_depth(TensorD::from({2, 2}, {500.0, 1500.0, 1000.0, 500.0}));
    EXPECT_EQ(z[0], 0.0);
    EXPECT_EQ(z[1], 1.0);
    EXPECT_EQ(z[2], 0.5);
    const auto flat = normalize_depth(TensorD::full({3, 3}, 7.0));
    for (auto v : flat.data()) EXPECT_EQ(v, 0.0);
}

TEST(GeometryPrior, PadReplicatesEdges) {
    const auto x = TensorD::from({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto y = pad_to_multiple(x, 4);
    ASSERT_EQ(y.shape(), (Shape{4, 4}));
    EXPECT_EQ(y.at(0, 3), 3.0);
    EXPECT_EQ(y.at(3, 0), 4.0);
    EXPECT_EQ(y.at(3, 3), 6.0);
}

TEST(GeometryPrior, PoolingAveragesPatches) {
    std::vector<double> v(16);
    for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i) / 15.0;
    const auto g = pool_depth_to_grid(TensorD::from({4, 4}, v), 2);
    EXPECT_EQ(g.grid, (GridShape{2, 2}));
    EXPECT_NEAR(g.z.at(0, 0), (0 + 1 + 4 + 5) / 60.0, 1e-15);
    EXPECT_NEAR(g.z.at(1, 1), (10 + 11 + 14 + 15) / 60.0, 1e-15);
}

TEST(GeometryPrior, DecayTensorIsOneOnZeroPrior) {
    Tape<double> tape(false);
    const auto g = TensorD::from({2, 2}, {0.0, 3.0, 3.0, 0.0});
    const auto b = decay_tensor(tape, g, 0.5);
    EXPECT_EQ(b[0], 1.0);
    EXPECT_NEAR(b[1], 0.125, 1e-15);
    EXPECT_THROW(decay_tensor(tape, g, 1.5), ParameterError);
}

TEST(GeometryPrior, ParsesFusionNames) {
    for (const auto mode : {FusionMode::Memory, FusionMode::Addition, FusionMode::Hadamard, FusionMode::Conv}) {
        EXPECT_EQ(parse_fusion_mode(fusion_mode_name(mode)), mode);
    }
    EXPECT_ANY_THROW(parse_fusion_mode("sum"));
}

} // namespace
} // namespace dfv2
