#include <benchmark/benchmark.h>

#include "dfv2/attention.hpp"
#include "dfv2/ops.hpp"

namespace {

using dfv2::GridShape;
using dfv2::Rng;
using dfv2::Tape;
using dfv2::Tensor;

constexpr std::size_t kHeadDim = 32;
constexpr float kBeta = 0.9f;

struct Inputs {
    Tensor<float> q, k, v;
};

Inputs make_inputs(std::size_t tokens) {
    Rng rng(7);
    return {rng.uniform_tensor<float>({tokens, kHeadDim}, -1, 1), rng.uniform_tensor<float>({tokens, kHeadDim}, -1, 1),
            rng.uniform_tensor<float>({tokens, kHeadDim}, -1, 1)};
}

void BM_GsaFull(benchmark::State& state) {
    const GridShape grid{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0))};
    const auto in = make_inputs(grid.tokens());
    Rng rng(8);
    const auto g = rng.uniform_tensor<float>({grid.tokens(), grid.tokens()}, 0, 4);
    Tape<float> tape(false);
    for (auto _ : state) benchmark::DoNotOptimize(dfv2::gsa_full(tape, in.q, in.k, in.v, g, kBeta));
    state.counters["tokens"] = static_cast<double>(grid.tokens());
}

void BM_GsaAxial(benchmark::State& state) {
    const GridShape grid{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0))};
    const auto in = make_inputs(grid.tokens());
    Rng rng(9);
    const auto gx = rng.uniform_tensor<float>({grid.tokens(), grid.cols}, 0, 4);
    const auto gy = rng.uniform_tensor<float>({grid.tokens(), grid.rows}, 0, 4);
    Tape<float> tape(false);
    for (auto _ : state) benchmark::DoNotOptimize(dfv2::gsa_axial(tape, in.q, in.k, in.v, grid, gx, gy, kBeta));
    state.counters["tokens"] = static_cast<double>(grid.tokens());
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(10);
    const auto a = rng.uniform_tensor<float>({n, n}, -1, 1);
    const auto b = rng.uniform_tensor<float>({n, n}, -1, 1);
    Tape<float> tape(false);
    for (auto _ : state) benchmark::DoNotOptimize(dfv2::ops::matmul(tape, a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

BENCHMARK(BM_GsaFull)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GsaAxial)->Arg(8)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
