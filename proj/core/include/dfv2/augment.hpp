#pragma once

#include "dfv2/dataset.hpp"
#include "dfv2/random.hpp"

namespace dfv2 {

inline constexpr double kAugmentFlipProbability = 0.5;
inline constexpr double kAugmentMinScale = 0.5;
inline constexpr double kAugmentMaxScale = 1.75;

/// Mirrors rgb, depth and labels left-right together.
RgbdSample flip_horizontal(const RgbdSample& sample);

/// Optional flip, then resize by `scale` (bilinear for rgb/depth, nearest for
/// labels) and center-crop or pad back to the original size. Padding
/// replicates edge pixels for rgb/depth and uses the ignore label.
RgbdSample augment_with(const RgbdSample& sample, bool flip, double scale);

/// Flip with probability 0.5 and scale drawn uniformly from [0.5, 1.75].
RgbdSample augment(const RgbdSample& sample, Rng& rng);

} // namespace dfv2
