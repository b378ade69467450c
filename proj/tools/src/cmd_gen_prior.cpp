// gen-prior: renders the geometry priors of one depth map as 8-bit PGM heatmaps.
//
// Every heatmap is scaled linearly from its own [min, max] to [0, 255]
// (a constant map becomes all zeros); the exact min and max are stored in
// the PGM header comment and in summary.txt.
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>

#include "commands.hpp"
#include "common.hpp"
#include "dfv2/geometry_prior.hpp"
#include "dfv2/netpbm.hpp"

namespace dfv2::cli {

namespace {

struct Range {
    double min = 0.0, max = 0.0;
};

Range range_of(std::span<const double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

PnmImage heatmap(std::span<const double> values, std::size_t rows, std::size_t cols, const std::string& name) {
    const Range r = range_of(values);
    PnmImage img;
    img.width = cols;
    img.height = rows;
    img.channels = 1;
    img.maxval = 255;
    img.samples.resize(values.size());
    const double span = r.max - r.min;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double t = span > 0.0 ? (values[i] - r.min) / span : 0.0;
        img.samples[i] = static_cast<std::uint16_t>(std::lround(255.0 * t));
    }
    img.comment = "dfv2 " + name + " min=" + RunManifest::format_number(r.min) +
                  " max=" + RunManifest::format_number(r.max) + " scale=linear-minmax-0-255";
    return img;
}

} // namespace

void register_gen_prior(CLI::App& app, int& exit_code) {
    struct Args {
        std::string depth, out;
        std::size_t patch = 16;
        double beta = 0.9;
    };
    auto args = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("gen-prior", "Render depth, spatial, geometry and decay heatmaps for a depth map");
    cmd->add_option("--depth", args->depth, "16-bit PGM depth map")->required();
    cmd->add_option("--patch", args->patch, "Patch size in pixels")->check(CLI::PositiveNumber);
    cmd->add_option("--beta", args->beta, "Decay rate in (0, 1]");
    cmd->add_option("--out", args->out, "Output directory")->required();
    cmd->callback([args, &exit_code] {
        const Stopwatch clock;
        if (!(args->beta > 0.0 && args->beta <= 1.0)) throw ParameterError("--beta must lie in (0, 1]");
        const PnmImage raw = read_pnm(args->depth);
        if (raw.channels != 1) throw ParseError(args->depth + ": depth must be a single-channel PGM (P5)");
        std::vector<double> values(raw.samples.begin(), raw.samples.end());
        const auto depth = TensorD::from({raw.height, raw.width}, std::move(values));
        const auto grid = pool_depth_to_grid(pad_to_multiple(normalize_depth(depth), args->patch), args->patch);
        const auto mem = FusionMemory<double>::make(FusionMode::Memory);
        const auto prior = build_geometry_prior(grid, mem);
        const std::size_t h = grid.grid.rows, w = grid.grid.cols, n = grid.grid.tokens();

        const std::filesystem::path out = args->out;
        std::filesystem::create_directories(out);
        std::ofstream summary(out / "summary.txt");
        if (!summary) throw IoError("cannot write '" + (out / "summary.txt").string() + "'");
        summary << "depth = " << args->depth << "\n"
                << "grid = " << h << "x" << w << "\n"
                << "patch = " << args->patch << "\n"
                << "beta = " << RunManifest::format_number(args->beta) << "\n"
                << "w_depth = " << RunManifest::format_number(mem.effective_depth()) << "\n"
                << "w_spatial = " << RunManifest::format_number(mem.effective_spatial()) << "\n";

        auto manifest = begin_manifest("gen-prior", 0, Precision::Wide);
        manifest.set("arg.depth", args->depth);
        manifest.set_int("arg.patch", static_cast<long long>(args->patch));
        manifest.set_number("arg.beta", args->beta);
        manifest.set("arg.out", args->out);

        auto emit = [&](const std::string& name, std::span<const double> v, std::size_t rows, std::size_t cols) {
            write_pnm(out / (name + ".pgm"), heatmap(v, rows, cols, name));
            const Range r = range_of(v);
            summary << name << ".min = " << RunManifest::format_number(r.min) << "\n"
                    << name << ".max = " << RunManifest::format_number(r.max) << "\n";
            manifest.set_number("metric." + name + ".min", r.min);
            manifest.set_number("metric." + name + ".max", r.max);
        };
        emit("depth_prior", prior.d.data(), n, n);
        emit("spatial_prior", prior.s.data(), n, n);
        emit("geometry_prior", prior.g.data(), n, n);

        Tape<double> tape(false);
        const auto decay = decay_tensor(tape, prior.g, args->beta);
        // Queries sit a quarter of the way in from each corner.
        const std::array<std::size_t, 2> qi{h / 4, h - 1 - h / 4};
        const std::array<std::size_t, 2> qj{w / 4, w - 1 - w / 4};
        for (const auto i : qi) {
            for (const auto j : qj) {
                const std::size_t p = i * w + j;
                const auto row = decay.data().subspan(p * n, n);
                emit("decay_r" + std::to_string(i) + "_c" + std::to_string(j), row, h, w);
            }
        }
        if (!summary) throw IoError("failed writing '" + (out / "summary.txt").string() + "'");
        std::cout << "wrote heatmaps for a " << h << "x" << w << " token grid to " << out.string() << "\n";
        finish_manifest(manifest, out / "manifest.txt", clock);
        exit_code = kOk;
    });
}

} // namespace dfv2::cli
