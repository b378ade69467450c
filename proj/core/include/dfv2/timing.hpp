#pragma once

#include <cstdint>
#include <vector>

#include "dfv2/attention.hpp"

namespace dfv2 {

/// Wall time of one narrow-float multi-head geometry attention layer (prior
/// fusion, projections, attention) on a random input over `grid`.
struct AttentionTiming {
    std::vector<double> seconds;  // one entry per repeat
    double median = 0.0;
};

/// Runs one untimed warm-up call followed by `repeats` timed calls.
AttentionTiming time_attention_layer(GridShape grid, std::size_t dim, std::size_t heads, AttentionLayout layout,
                                     std::size_t repeats, std::uint64_t seed = 0);

double median(std::vector<double> values);

} // namespace dfv2
