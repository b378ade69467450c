#include <iostream>
#include <memory>

#include "commands.hpp"
#include "common.hpp"
#include "dfv2/synth.hpp"

namespace dfv2::cli {

void register_synth(CLI::App& app, int& exit_code) {
    struct Args {
        std::string out;
        std::size_t count = 8, size = 64, classes = 4;
        std::uint64_t seed = 0;
    };
    auto args = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("synth", "Write synthetic depth-ambiguous scenes as PPM/PGM plus a manifest");
    cmd->add_option("--out", args->out, "Output directory")->required();
    cmd->add_option("--count", args->count, "Number of scenes")->check(CLI::PositiveNumber);
    cmd->add_option("--size", args->size, "Height and width (multiple of 32)")->check(CLI::PositiveNumber);
    cmd->add_option("--classes", args->classes, "Class count including background");
    cmd->add_option("--seed", args->seed, "Seed of the first scene");
    cmd->callback([args, &exit_code] {
        const Stopwatch clock;
        const auto samples = synth_dataset(args->seed, args->count, args->size, args->size, args->classes);
        const auto dataset_manifest = write_dataset(args->out, samples);
        std::cout << "wrote " << samples.size() << " scenes; dataset manifest: " << dataset_manifest.string() << "\n";

        auto manifest = begin_manifest("synth", args->seed, Precision::Wide);
        manifest.set("arg.out", args->out);
        manifest.set_int("arg.count", static_cast<long long>(args->count));
        manifest.set_int("arg.size", static_cast<long long>(args->size));
        manifest.set_int("arg.classes", static_cast<long long>(args->classes));
        manifest.set("output.dataset_manifest", dataset_manifest.string());
        finish_manifest(manifest, std::filesystem::path(args->out) / "run.manifest", clock);
        exit_code = kOk;
    });
}

} // namespace dfv2::cli
