#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dfv2/attention.hpp"
#include "dfv2/decay.hpp"
#include "dfv2/geometry_prior.hpp"

namespace dfv2 {

inline constexpr std::size_t kNumStages = 4;
/// Input height and width must be multiples of this (stem /4, then three /2 steps).
inline constexpr std::size_t kInputDivisor = 32;

struct ModelConfig {
    std::array<std::size_t, kNumStages> stage_dims{32, 64, 96, 128};
    std::array<std::size_t, kNumStages> stage_depths{2, 2, 4, 2};
    std::array<std::size_t, kNumStages> stage_heads{1, 2, 4, 8};
    std::size_t num_classes = 4;
    double ffn_ratio = 4.0;
    std::size_t decoder_dim = 64;
    DecayStrategy decay = DecayStrategy::linear(0.75, 1.0);
    FusionMode fusion = FusionMode::Memory;
    PriorTerms priors{true, true};
    /// Stages 0-2 use axial attention when set; stage 3 is always full.
    bool decompose = true;

    AttentionLayout stage_layout(std::size_t stage) const {
        return decompose && stage + 1 < kNumStages ? AttentionLayout::Axial : AttentionLayout::Full;
    }
    std::size_t ffn_hidden(std::size_t stage) const;
    bool uses_depth() const { return priors.depth; }

    /// Throws ParameterError describing the first violated constraint.
    void validate() const;

    /// Desk-scale variant: dims [32,64,96,128], depths [2,2,4,2], heads [1,2,4,8].
    static ModelConfig nano();
    /// Gradient-check variant: dims [8,16,24,32], one block per stage.
    static ModelConfig tiny();

    bool operator==(const ModelConfig&) const = default;
};

/// Rows of the vanilla-to-geometry attention roadmap.
enum class AblationArm { Vanilla, DepthOnly, SpatialOnly, Both, BothAxial };

AblationArm parse_arm(std::string_view name);
std::string_view arm_name(AblationArm arm);
/// Sets priors/decompose for the arm; vanilla and spatial-only never read depth.
void apply_arm(ModelConfig& config, AblationArm arm);

/// Defaults are the toy recipe: from-scratch training on 64x64 synthetic
/// scenes needs a far larger rate than fine-tuning a pretrained backbone.
struct TrainConfig {
    std::size_t batch = 4;
    std::size_t steps = 600;
    double lr = 2e-3;
    double weight_decay = 1e-2;
    double poly_power = 0.9;
    /// Linear ramp of the learning rate over the first steps.
    std::size_t warmup_steps = 30;
    /// Global gradient-norm clip; 0 disables clipping.
    double grad_clip = 1.0;
    std::size_t train_samples = 200;
    std::size_t val_samples = 50;
    std::size_t image_size = 64;
    std::size_t log_every = 10;
    bool augment = true;
    Precision precision = Precision::Narrow;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct RunConfig {
    ModelConfig model = ModelConfig::nano();
    TrainConfig train;

    bool operator==(const RunConfig&) const = default;
};

/// Parses `key = value` lines. '#' starts a comment. Unknown keys, duplicate
/// keys and malformed values raise ParseError naming `source`.
RunConfig parse_run_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

} // namespace dfv2
