#include <cstdio>
#include <iostream>
#include <memory>
#include <regex>

#include "commands.hpp"
#include "common.hpp"
#include "dfv2/flops.hpp"
#include "dfv2/timing.hpp"

namespace dfv2::cli {

namespace {

GridShape parse_grid(const std::string& text) {
    static const std::regex re(R"((\d+)[xX](\d+))");
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw UsageError("--grid expects HxW, got '" + text + "'");
    const GridShape g{std::stoul(m[1]), std::stoul(m[2])};
    if (g.rows < 2 || g.cols < 2) throw UsageError("--grid dims must be >= 2");
    return g;
}

} // namespace

void register_bench(CLI::App& app, int& exit_code) {
    struct Args {
        std::string grid = "32x32", mode = "both", manifest;
        std::size_t dim = 64, heads = 4, repeat = 5;
    };
    auto args = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("bench", "Analytic FLOPs and measured time of full vs axial attention");
    cmd->add_option("--grid", args->grid, "Token grid HxW");
    cmd->add_option("--dim", args->dim, "Channels")->check(CLI::PositiveNumber);
    cmd->add_option("--heads", args->heads, "Attention heads")->check(CLI::PositiveNumber);
    cmd->add_option("--mode", args->mode, "full, axial or both")->check(CLI::IsMember({"full", "axial", "both"}));
    cmd->add_option("--repeat", args->repeat, "Timed repeats per mode")->check(CLI::PositiveNumber);
    cmd->add_option("--run-manifest", args->manifest, "Where to write the run manifest");
    cmd->callback([args, &exit_code] {
        const Stopwatch clock;
        const GridShape grid = parse_grid(args->grid);
        if (args->dim % args->heads != 0) throw UsageError("--dim must be divisible by --heads");

        auto manifest = begin_manifest("bench", 0, Precision::Narrow);
        manifest.set("arg.grid", args->grid);
        manifest.set_int("arg.dim", static_cast<long long>(args->dim));
        manifest.set_int("arg.heads", static_cast<long long>(args->heads));
        manifest.set("arg.mode", args->mode);
        manifest.set_int("arg.repeat", static_cast<long long>(args->repeat));

        std::cout << "mode\tgrid\tdim\theads\tattention_flops\tmedian_ms\n";
        double flops[2] = {0, 0}, times[2] = {0, 0};
        for (const auto layout : {AttentionLayout::Full, AttentionLayout::Axial}) {
            const bool full = layout == AttentionLayout::Full;
            const char* name = full ? "full" : "axial";
            if (args->mode != "both" && args->mode != name) continue;
            const auto f = full ? attention_flops_full(grid, args->dim) : attention_flops_axial(grid, args->dim);
            const auto t = time_attention_layer(grid, args->dim, args->heads, layout, args->repeat);
            flops[full ? 0 : 1] = static_cast<double>(f);
            times[full ? 0 : 1] = t.median;
            char row[160];
            std::snprintf(row, sizeof row, "%s\t%zux%zu\t%zu\t%zu\t%llu\t%.3f\n", name, grid.rows, grid.cols, args->dim,
                          args->heads, static_cast<unsigned long long>(f), 1e3 * t.median);
            std::cout << row;
            manifest.set_int(std::string("metric.") + name + ".attention_flops", static_cast<long long>(f));
            manifest.set_number(std::string("metric.") + name + ".median_s", t.median);
        }
        if (args->mode == "both") {
            const double flop_ratio = flops[1] / flops[0], time_ratio = times[1] / times[0];
            std::printf("ratio.flops\taxial/full = %.6f\t(H+W)/(HW) = %.6f\n", flop_ratio,
                        static_cast<double>(grid.rows + grid.cols) / static_cast<double>(grid.tokens()));
            std::printf("ratio.time\taxial/full = %.6f\n", time_ratio);
            manifest.set_number("metric.ratio.flops", flop_ratio);
            manifest.set_number("metric.ratio.time", time_ratio);
        }
        std::cout.flush();
        finish_manifest(manifest, manifest_path("bench", args->manifest), clock);
        exit_code = kOk;
    });
}

} // namespace dfv2::cli
