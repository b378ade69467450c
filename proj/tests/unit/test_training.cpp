#include <gtest/gtest.h>

#include <cmath>

#include "dfv2/metrics.hpp"
#include "dfv2/optimizer.hpp"
#include "dfv2/random.hpp"
#include "dfv2/training.hpp"
#include "oracles.hpp"

namespace dfv2 {
namespace {

TEST(Metrics, MatchesSetOracle) {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const auto k = static_cast<std::size_t>(rng.integer(2, 6));
        const auto n = static_cast<std::size_t>(rng.integer(1, 300));
        std::vector<int> gt(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Skewed draws leave some classes absent from both maps.
            gt[i] = rng.bernoulli(0.1) ? kIgnoreIndex : static_cast<int>(rng.integer(0, static_cast<long>(k) / 2));
            pred[i] = static_cast<int>(rng.integer(0, static_cast<long>(k) - 1));
            if (rng.bernoulli(0.5)) pred[i] = gt[i] == kIgnoreIndex ? 0 : gt[i];
        }
        ConfusionMatrix cm(k);
        cm.add(gt, pred);
        const auto got = miou(cm);
        const auto ref = oracle::iou_by_sets(gt, pred, k);
        ASSERT_EQ(got.per_class.size(), k);
        for (std::size_t c = 0; c < k; ++c) {
            ASSERT_EQ(got.per_class[c].has_value(), ref[c].has_value());
            if (ref[c]) {
                EXPECT_EQ(*got.per_class[c], *ref[c]);
            }
        }
        EXPECT_EQ(got.miou, oracle::mean_defined(ref));
    }
}

TEST(Metrics, EmptyAndInvalidInputs) {
    ConfusionMatrix cm(3);
    EXPECT_EQ(miou(cm).miou, 0.0);
    EXPECT_EQ(miou(cm).valid_classes, 0u);
    const std::vector<int> gt{0, 5}, pred{0, 0};
    EXPECT_THROW(cm.add(gt, pred), DataError);
    const std::vector<int> gt2{0, 1}, pred2{0, -1};
    EXPECT_THROW(cm.add(gt2, pred2), DataError);
}

TEST(Metrics, ArgmaxTiesGoToLowestClass) {
    const auto logits = TensorD::from({3, 1, 2}, {1.0, 0.0, 1.0, 2.0, 0.5, 2.0});
    EXPECT_EQ(argmax_classes(logits), (std::vector<int>{0, 1}));
}

TEST(Optimizer, FirstAdamWStepMovesBySignedLr) {
    auto w = TensorD::from({1, 2}, {1.0, -2.0}, true);
    AdamWOptions opt;
    opt.weight_decay = 0.1;
    AdamW<double> adam({{"w", w}}, opt);
    w.ensure_grad();
    w.mutable_grad()[0] = 3.0;
    w.mutable_grad()[1] = -0.5;
    adam.step(0.01);
    const double d0 = 1.0 - 0.01 * 0.1, d1 = -2.0 * (1.0 - 0.01 * 0.1);
    EXPECT_NEAR(w[0], d0 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
    EXPECT_NEAR(w[1], d1 + 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_EQ(adam.steps_taken(), 1u);
}

TEST(Optimizer, BiasesAreNotDecayed) {
    auto b = TensorD::from({2}, {1.0, 1.0}, true);
    AdamWOptions opt;
    opt.weight_decay = 0.5;
    AdamW<double> adam({{"b", b}}, opt);
    b.ensure_grad();
    adam.step(0.1);  // zero gradient, so only decay could move it
    EXPECT_EQ(b[0], 1.0);
}

TEST(Optimizer, PolyLearningRate) {
    EXPECT_EQ(poly_lr(1.0, 0, 10, 0.9), 1.0);
    EXPECT_NEAR(poly_lr(1.0, 5, 10, 1.0), 0.5, 1e-15);
    EXPECT_NEAR(poly_lr(2.0, 5, 10, 0.9), 2.0 * std::pow(0.5, 0.9), 1e-15);
    EXPECT_EQ(poly_lr(1.0, 10, 10, 0.9), 0.0);
}

TEST(Optimizer, ClipGradNorm) {
    auto a = TensorD::from({2}, {0, 0}, true);
    auto b = TensorD::from({1}, {0}, true);
    a.ensure_grad();
    b.ensure_grad();
    a.mutable_grad()[0] = 3.0;
    a.mutable_grad()[1] = 0.0;
    b.mutable_grad()[0] = 4.0;
    const std::vector<NamedTensor<double>> params{{"a", a}, {"b", b}};
    EXPECT_NEAR(clip_grad_norm(params, 1.0), 5.0, 1e-15);
    EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
    EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
    EXPECT_NEAR(clip_grad_norm(params, 10.0), 1.0, 1e-15);
    EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
}

RunConfig small_run() {
    RunConfig c;
    c.model = ModelConfig::tiny();
    c.train.steps = 3;
    c.train.batch = 2;
    c.train.lr = 1e-3;
    c.train.train_samples = 4;
    c.train.val_samples = 2;
    c.train.image_size = 32;
    c.train.log_every = 1;
    c.train.precision = Precision::Wide;
    return c;
}

TEST(Training, WideRunsAreBitReproducible) {
    const auto cfg = small_run();
    const auto data = make_toy_split(cfg, 5);
    auto m1 = SegmentationModel<double>::create(cfg.model, 5);
    auto m2 = SegmentationModel<double>::create(cfg.model, 5);
    const auto r1 = train_model(m1, cfg, data, 5);
    const auto r2 = train_model(m2, cfg, data, 5);
    ASSERT_EQ(r1.log.size(), 3u);
    EXPECT_EQ(r1.final_loss, r2.final_loss);
    EXPECT_EQ(r1.validation.miou.miou, r2.validation.miou.miou);
    for (std::size_t i = 0; i < r1.log.size(); ++i) EXPECT_EQ(r1.log[i].loss, r2.log[i].loss);
}

TEST(Training, ZeroStepsOnlyEvaluates) {
    auto cfg = small_run();
    cfg.train.steps = 0;
    const auto data = make_toy_split(cfg, 1);
    auto model = SegmentationModel<double>::create(cfg.model, 1);
    const auto before = model.parameters()[0].tensor.detach();
    const auto r = train_model(model, cfg, data, 1);
    EXPECT_TRUE(r.log.empty());
    EXPECT_EQ(r.final_loss, 0.0);
    EXPECT_EQ(model.parameters()[0].tensor[0], before[0]);
    EXPECT_EQ(r.validation.confusion.total(), 2u * 32u * 32u);
}

TEST(Training, WarmupRampsTheLearningRate) {
    auto cfg = small_run();
    cfg.train.warmup_steps = 2;
    const auto data = make_toy_split(cfg, 2);
    auto model = SegmentationModel<double>::create(cfg.model, 2);
    const auto r = train_model(model, cfg, data, 2);
    EXPECT_NEAR(r.log[0].lr, 0.5 * poly_lr(1e-3, 0, 3, 0.9), 1e-18);
    EXPECT_NEAR(r.log[1].lr, poly_lr(1e-3, 1, 3, 0.9), 1e-18);
}

TEST(Training, DivergenceIsReported) {
    auto cfg = small_run();
    cfg.train.lr = 1e30;
    cfg.train.steps = 4;
    const auto data = make_toy_split(cfg, 3);
    auto model = SegmentationModel<double>::create(cfg.model, 3);
    EXPECT_THROW(train_model(model, cfg, data, 3), DivergenceError);
}

TEST(Training, SplitDependsOnlyOnSeedAndSizes) {
    auto cfg = small_run();
    const auto a = make_toy_split(cfg, 8);
    apply_arm(cfg.model, AblationArm::Vanilla);
    const auto b = make_toy_split(cfg, 8);
    ASSERT_EQ(a.train.size(), 4u);
    ASSERT_EQ(a.val.size(), 2u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.train[i].labels, b.train[i].labels);
    EXPECT_NE(a.train[0].labels, a.val[0].labels);
}

} // namespace
} // namespace dfv2
