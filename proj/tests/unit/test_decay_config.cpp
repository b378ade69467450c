#include <gtest/gtest.h>

#include <fstream>

#include "dfv2/decay.hpp"
#include "dfv2/errors.hpp"
#include "dfv2/model_config.hpp"

namespace dfv2 {
namespace {

TEST(Decay, LinearScheduleIsExact) {
    const auto s = sample_decay_rates(DecayStrategy::linear(0.75, 1.0), 4);
    EXPECT_EQ(s.rates, (std::vector<double>{0.75, 0.8125, 0.875, 0.9375}));
}

TEST(Decay, FixedRepeatsTheRate) {
    const auto s = sample_decay_rates(DecayStrategy::fixed(0.25), 3);
    EXPECT_EQ(s.rates, (std::vector<double>{0.25, 0.25, 0.25}));
}

TEST(Decay, AblationStrategySetIsValid) {
    const std::vector<DecayStrategy> set{DecayStrategy::fixed(0.25), DecayStrategy::fixed(0.5),
                                         DecayStrategy::fixed(0.75), DecayStrategy::linear(0.5, 1.0),
                                         DecayStrategy::linear(0.75, 1.0)};
    for (const auto& strategy : set) {
        for (std::size_t heads : {1u, 2u, 4u, 8u}) {
            const auto s = sample_decay_rates(strategy, heads);
            ASSERT_EQ(s.heads(), heads);
            for (double r : s.rates) {
                EXPECT_GT(r, 0.0);
                EXPECT_LE(r, 1.0);
            }
        }
    }
}

TEST(Decay, RejectsInvalidRanges) {
    EXPECT_THROW(sample_decay_rates(DecayStrategy::fixed(0.0), 2), ParameterError);
    EXPECT_THROW(sample_decay_rates(DecayStrategy::fixed(1.2), 2), ParameterError);
    EXPECT_THROW(sample_decay_rates(DecayStrategy::linear(0.9, 0.8), 2), ParameterError);
    EXPECT_THROW(sample_decay_rates(DecayStrategy::linear(0.5, 1.5), 2), ParameterError);
    EXPECT_THROW(sample_decay_rates(DecayStrategy::linear(0.5, 1.0), 0), ParameterError);
}

TEST(Decay, ParseRoundTrips) {
    for (const auto& s : {DecayStrategy::fixed(0.5), DecayStrategy::linear(0.75, 1.0), DecayStrategy::linear(0.1, 0.3)}) {
        EXPECT_EQ(DecayStrategy::parse(s.to_string()), s);
    }
    EXPECT_THROW(DecayStrategy::parse("fixed"), ParameterError);
    EXPECT_THROW(DecayStrategy::parse("linear:0.5"), ParameterError);
    EXPECT_THROW(DecayStrategy::parse("fixed:abc"), ParameterError);
    EXPECT_THROW(DecayStrategy::parse("cosine:0.5:1"), ParameterError);
}

TEST(Config, ParsesEveryKey) {
    const auto c = parse_run_config(R"(
# nano run
stage_dims = 16,32,48,64
stage_depths = 1,1,2,1
stage_heads = 1,2,2,4
num_classes = 5
ffn_ratio = 2
decoder_dim = 32
decay = fixed:0.5
fusion = hadamard
priors = both
decompose = no
batch = 2
steps = 10
lr = 0.001
weight_decay = 0
poly_power = 1
warmup_steps = 3
grad_clip = 1.5
train_samples = 8
val_samples = 4
image_size = 32
log_every = 5
augment = false
precision = wide
)");
    EXPECT_EQ(c.model.stage_dims, (std::array<std::size_t, 4>{16, 32, 48, 64}));
    EXPECT_EQ(c.model.stage_heads[3], 4u);
    EXPECT_EQ(c.model.num_classes, 5u);
    EXPECT_EQ(c.model.decay, DecayStrategy::fixed(0.5));
    EXPECT_EQ(c.model.fusion, FusionMode::Hadamard);
    EXPECT_EQ(c.model.priors, (PriorTerms{true, true}));
    EXPECT_FALSE(c.model.decompose);
    EXPECT_EQ(parse_run_config("priors = depth\n").model.priors, (PriorTerms{true, false}));
    EXPECT_EQ(parse_run_config("priors = none\n").model.priors, (PriorTerms{false, false}));
    EXPECT_EQ(c.train.steps, 10u);
    EXPECT_EQ(c.train.lr, 0.001);
    EXPECT_EQ(c.train.warmup_steps, 3u);
    EXPECT_EQ(c.train.grad_clip, 1.5);
    EXPECT_FALSE(c.train.augment);
    EXPECT_EQ(c.train.precision, Precision::Wide);
}

TEST(Config, FormatParseRoundTrip) {
    RunConfig c;
    c.model.decay = DecayStrategy::linear(0.5, 1.0);
    c.model.fusion = FusionMode::Conv;
    c.train.lr = 1.0 / 3.0;
    c.train.precision = Precision::Wide;
    EXPECT_EQ(parse_run_config(format_run_config(c)), c);
}

TEST(Config, ShippedNanoConfigMatchesDefaults) {
    std::ifstream f(DFV2_SOURCE_DIR "/configs/nano.cfg");
    ASSERT_TRUE(f) << "configs/nano.cfg missing";
    const std::string text{std::istreambuf_iterator<char>(f), {}};
    EXPECT_EQ(parse_run_config(text, "nano.cfg"), RunConfig{});
}

TEST(Config, ErrorsNameSourceAndLine) {
    try {
        parse_run_config("batch = 2\nbogus = 1\n", "run.cfg");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_run_config("batch = 2\nbatch = 3\n"), ParseError);
    EXPECT_THROW(parse_run_config("batch = two\n"), ParseError);
    EXPECT_THROW(parse_run_config("no equals sign\n"), ParseError);
    EXPECT_THROW(parse_run_config("stage_dims = 1,2,3\n"), ParseError);
    EXPECT_THROW(parse_run_config("image_size = 48\n"), ParseError);
    EXPECT_THROW(parse_run_config("stage_heads = 3,2,4,8\n"), ParseError);
    EXPECT_THROW(parse_run_config("fusion = hadamard\npriors = depth\n"), ParseError);
}

TEST(Config, ArmsSetPriorsAndLayout) {
    ModelConfig m = ModelConfig::nano();
    apply_arm(m, AblationArm::Vanilla);
    EXPECT_FALSE(m.priors.any());
    EXPECT_EQ(m.stage_layout(0), AttentionLayout::Full);
    apply_arm(m, AblationArm::DepthOnly);
    EXPECT_EQ(m.priors, (PriorTerms{true, false}));
    apply_arm(m, AblationArm::SpatialOnly);
    EXPECT_EQ(m.priors, (PriorTerms{false, true}));
    EXPECT_FALSE(m.uses_depth());
    apply_arm(m, AblationArm::Both);
    EXPECT_EQ(m.priors, (PriorTerms{true, true}));
    EXPECT_EQ(m.stage_layout(0), AttentionLayout::Full);
    apply_arm(m, AblationArm::BothAxial);
    EXPECT_EQ(m.stage_layout(0), AttentionLayout::Axial);
    EXPECT_EQ(m.stage_layout(3), AttentionLayout::Full);
    for (auto arm : {AblationArm::Vanilla, AblationArm::DepthOnly, AblationArm::SpatialOnly, AblationArm::Both,
                     AblationArm::BothAxial}) {
        EXPECT_EQ(parse_arm(arm_name(arm)), arm);
    }
    EXPECT_ANY_THROW(parse_arm("rgb"));
}

TEST(Config, ValidateRejectsBadModels) {
    ModelConfig m = ModelConfig::nano();
    m.stage_heads[1] = 3;  // 64 channels not divisible
    EXPECT_THROW(m.validate(), ParameterError);
    m = ModelConfig::nano();
    m.num_classes = 0;
    EXPECT_THROW(m.validate(), ParameterError);
    EXPECT_NO_THROW(ModelConfig::tiny().validate());
}

} // namespace
} // namespace dfv2
