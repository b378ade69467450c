#include <gtest/gtest.h>

#include <cmath>

#include "dfv2/attention.hpp"
#include "dfv2/ops.hpp"
#include "dfv2/random.hpp"
#include "oracles.hpp"

namespace dfv2 {
namespace {

double max_diff(const TensorD& a, const TensorD& b) {
    EXPECT_EQ(a.shape(), b.shape());
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

TEST(Attention, FullMatchesRowwiseOracle) {
    Rng rng(21);
    Tape<double> tape(false);
    for (int trial = 0; trial < 25; ++trial) {
        const auto n = static_cast<std::size_t>(rng.integer(1, 20));
        const auto d = static_cast<std::size_t>(rng.integer(1, 8));
        const auto q = rng.uniform_tensor<double>({n, d}, -2, 2);
        const auto k = rng.uniform_tensor<double>({n, d}, -2, 2);
        const auto v = rng.uniform_tensor<double>({n, d}, -2, 2);
        const auto g = rng.uniform_tensor<double>({n, n}, 0, 6);
        const double beta = rng.uniform(0.3, 1.0);
        EXPECT_LE(max_diff(gsa_full(tape, q, k, v, g, beta), oracle::attention(q, k, v, g, beta)), 1e-12);
        EXPECT_LE(max_diff(vanilla_attention(tape, q, k, v), oracle::attention(q, k, v, TensorD{}, 1.0)), 1e-12);
    }
}

TEST(Attention, AxialMatchesTwoPassOracle) {
    Rng rng(22);
    Tape<double> tape(false);
    for (int trial = 0; trial < 25; ++trial) {
        const auto rows = static_cast<std::size_t>(rng.integer(1, 6));
        const auto cols = static_cast<std::size_t>(rng.integer(1, 6));
        const std::size_t n = rows * cols, d = 4;
        const auto q = rng.uniform_tensor<double>({n, d}, -2, 2);
        const auto k = rng.uniform_tensor<double>({n, d}, -2, 2);
        const auto v = rng.uniform_tensor<double>({n, d}, -2, 2);
        const auto gx = rng.uniform_tensor<double>({n, cols}, 0, 5);
        const auto gy = rng.uniform_tensor<double>({n, rows}, 0, 5);
        const double beta = rng.uniform(0.3, 1.0);
        const auto got = gsa_axial(tape, q, k, v, {rows, cols}, gx, gy, beta);
        EXPECT_LE(max_diff(got, oracle::axial_attention(q, k, v, rows, cols, gx, gy, beta)), 1e-12);
    }
}

TEST(Attention, BetaOneAndZeroPriorReduceToVanilla) {
    Rng rng(23);
    Tape<double> tape(false);
    const auto q = rng.uniform_tensor<double>({9, 3}, -1, 1);
    const auto k = rng.uniform_tensor<double>({9, 3}, -1, 1);
    const auto v = rng.uniform_tensor<double>({9, 3}, -1, 1);
    const auto base = vanilla_attention(tape, q, k, v);
    EXPECT_LE(max_diff(gsa_full(tape, q, k, v, rng.uniform_tensor<double>({9, 9}, 0, 8), 1.0), base), 1e-12);
    EXPECT_LE(max_diff(gsa_full(tape, q, k, v, TensorD::zeros({9, 9}), 0.4), base), 1e-12);
}

TEST(Attention, DecayedWeightsNeverExceedSoftmax) {
    Rng rng(24);
    Tape<double> tape(false);
    const auto q = rng.uniform_tensor<double>({12, 4}, -3, 3);
    const auto k = rng.uniform_tensor<double>({12, 4}, -3, 3);
    const auto g = rng.uniform_tensor<double>({12, 12}, 0, 4);
    const auto soft = geo_attention_weights(tape, q, k, TensorD{}, 1.0);
    const auto decayed = geo_attention_weights(tape, q, k, g, 0.6);
    for (std::size_t r = 0; r < 12; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 12; ++c) {
            EXPECT_LE(decayed.at(r, c), soft.at(r, c));
            s += decayed.at(r, c);
        }
        EXPECT_GT(s, 0.0);
        EXPECT_LE(s, 1.0 + 1e-12);
    }
}

TEST(Attention, AxialOnOneRowIsFullAttentionOverThatRow) {
    // With H = 1 the vertical pass attends to a single key with weight
    // beta^gy = 1, leaving the horizontal pass unchanged.
    Rng rng(25);
    Tape<double> tape(false);
    const auto q = rng.uniform_tensor<double>({5, 2}, -1, 1);
    const auto k = rng.uniform_tensor<double>({5, 2}, -1, 1);
    const auto v = rng.uniform_tensor<double>({5, 2}, -1, 1);
    const auto gx = rng.uniform_tensor<double>({5, 5}, 0, 3);
    const auto got = gsa_axial(tape, q, k, v, {1, 5}, gx, TensorD::zeros({5, 1}), 0.7);
    EXPECT_LE(max_diff(got, gsa_full(tape, q, k, v, gx, 0.7)), 1e-12);
}

TEST(Attention, RejectsMismatchedShapes) {
    Tape<double> tape(false);
    const auto q = TensorD::zeros({4, 2});
    EXPECT_THROW(gsa_full(tape, q, q, q, TensorD::zeros({3, 3}), 0.5), DimensionError);
    EXPECT_THROW(vanilla_attention(tape, q, TensorD::zeros({4, 3}), q), DimensionError);
    EXPECT_THROW(gsa_axial(tape, q, q, q, {3, 2}, TensorD{}, TensorD{}, 0.5), DimensionError);
}

TEST(Attention, MultiHeadUsesPerHeadColumnSlices) {
    // Two heads with identity projections: each output column block equals
    // single-head attention on that block with the head's own rate.
    Rng rng(26);
    Tape<double> tape(false);
    const std::size_t c = 4;
    auto w = AttentionLayerWeights<double>::make(c, 2, FusionMode::Memory, rng);
    std::vector<double> eye(c * c, 0.0);
    for (std::size_t i = 0; i < c; ++i) eye[i * c + i] = 1.0;
    w.wq = w.wk = w.wv = w.wo = TensorD::from({c, c}, eye);
    const auto x = rng.uniform_tensor<double>({6, c}, -1, 1);
    FusedPrior<double> prior;
    prior.g = rng.uniform_tensor<double>({6, 6}, 0, 3);
    const auto sched = sample_decay_rates(DecayStrategy::linear(0.5, 1.0), 2);
    const auto out = multi_head_gsa(tape, x, {2, 3}, prior, w, sched, AttentionLayout::Full);
    for (std::size_t h = 0; h < 2; ++h) {
        const auto xs = ops::slice_cols(tape, x, h * 2, 2);
        const auto ref = oracle::attention(xs, xs, xs, prior.g, sched.rates[h]);
        for (std::size_t r = 0; r < 6; ++r)
            for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out.at(r, h * 2 + j), ref.at(r, j), 1e-12);
    }
}

TEST(Attention, MultiHeadRejectsScheduleHeadMismatch) {
    Rng rng(27);
    Tape<double> tape(false);
    const auto w = AttentionLayerWeights<double>::make(4, 2, FusionMode::Memory, rng);
    const auto x = rng.uniform_tensor<double>({4, 4}, -1, 1);
    EXPECT_ANY_THROW(multi_head_gsa(tape, x, {2, 2}, FusedPrior<double>{}, w,
                                    sample_decay_rates(DecayStrategy::fixed(0.5), 4), AttentionLayout::Full));
}

} // namespace
} // namespace dfv2
