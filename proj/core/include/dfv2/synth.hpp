#pragma once

#include <cstdint>
#include <vector>

#include "dfv2/dataset.hpp"

namespace dfv2 {

/// Depth layout in raw sensor units: a flat background wall, boxes standing
/// well in front of it, and one class lying almost flush with it.
inline constexpr double kSynthWallDepth = 4000.0;
inline constexpr double kSynthNearOffset = 3000.0;
inline constexpr double kSynthFlushOffset = 300.0;
/// Uniform integer noise added to every depth pixel.
inline constexpr int kSynthDepthNoise = 15;

/// Deterministic depth-ambiguous scene: a background wall plus K-1
/// axis-aligned rectangles, one per class, in distinct cells of a coarse grid.
/// Classes K-2 and K-1 share one RGB color and one cell row; K-2 stands in
/// front of the wall while K-1 sits just in front of it, so only depth tells
/// them apart. Requires K >= 2 and h, w multiples of 32.
RgbdSample synth_scene(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t num_classes);

/// Scenes for seeds first_seed .. first_seed + count - 1.
std::vector<RgbdSample> synth_dataset(std::uint64_t first_seed, std::size_t count, std::size_t h, std::size_t w,
                                      std::size_t num_classes);

} // namespace dfv2
