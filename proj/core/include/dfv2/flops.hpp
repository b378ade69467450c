#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfv2/model_config.hpp"

namespace dfv2 {

/// Score (Q K^T) plus apply (A V) FLOPs of full attention over all grid
/// tokens, summed over heads: 2 * N^2 * d each.
std::uint64_t attention_flops_full(GridShape grid, std::size_t dim);

/// Same for the axial decomposition: 2 * HW * (H + W) * d each.
std::uint64_t attention_flops_axial(GridShape grid, std::size_t dim);

enum class FlopLayout { AsConfigured, AllFull, AllAxial };

struct FlopEntry {
    std::string layer;
    std::string kind;  // conv, linear, attention
    std::uint64_t flops = 0;
};

/// FLOPs = 2 x multiply-accumulates. Elementwise ops, norms and resampling are
/// not counted.
struct FlopReport {
    std::vector<FlopEntry> entries;
    std::array<std::uint64_t, kNumStages> stage_attention{};
    std::uint64_t attention = 0;
    std::uint64_t total = 0;
};

FlopReport estimate_flops(const ModelConfig& config, std::size_t h, std::size_t w,
                          FlopLayout layout = FlopLayout::AsConfigured);

} // namespace dfv2
