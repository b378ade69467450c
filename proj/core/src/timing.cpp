#include "dfv2/timing.hpp"

#include <algorithm>
#include <chrono>

namespace dfv2 {

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AttentionTiming time_attention_layer(GridShape grid, std::size_t dim, std::size_t heads, AttentionLayout layout,
                                     std::size_t repeats, std::uint64_t seed) {
    if (grid.rows < 2 || grid.cols < 2) throw ParameterError("attention timing: grid dims must be >= 2");
    Rng rng(seed);
    const auto x = rng.uniform_tensor<float>({grid.tokens(), dim}, -1.0, 1.0);
    const DepthGrid<float> depth{grid, rng.uniform_tensor<float>({grid.rows, grid.cols}, 0.0, 1.0)};
    const auto stage = StagePrior<float>::build(grid, &depth, {}, FusionMode::Memory, layout);
    const auto w = AttentionLayerWeights<float>::make(dim, heads, FusionMode::Memory, rng);
    const auto sched = sample_decay_rates(DecayStrategy::linear(0.75, 1.0), heads);

    auto run = [&] {
        Tape<float> tape(false);
        return multi_head_gsa(tape, x, stage, w, sched);
    };
    run();
    AttentionTiming t;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        run();
        t.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    t.median = median(t.seconds);
    return t;
}

} // namespace dfv2
