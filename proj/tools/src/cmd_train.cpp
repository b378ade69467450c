#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "commands.hpp"
#include "common.hpp"
#include "dfv2/checkpoint.hpp"
#include "dfv2/training.hpp"

namespace dfv2::cli {

namespace {

template <typename T>
void train_and_save(const RunConfig& config, std::uint64_t seed, const std::filesystem::path& out,
                    RunManifest& manifest) {
    const auto data = make_toy_split(config, seed);
    auto model = SegmentationModel<T>::create(config.model, seed);
    std::ofstream log(out / "train_log.tsv");
    if (!log) throw IoError("cannot write '" + (out / "train_log.tsv").string() + "'");
    log << "step\tloss\tlr\n";
    const auto result = train_model(model, config, data, seed, [&log](const TrainLogEntry& e) {
        char line[96];
        std::snprintf(line, sizeof line, "%zu\t%.6f\t%.6g\n", e.step, e.loss, e.lr);
        log << line;
        std::cout << "step " << line;
    });
    save_checkpoint(out / "model.ckpt", model, config);
    write_dataset(out / "val", data.val);

    std::cout << "validation mIoU " << result.validation.miou.miou << "\n";
    manifest.set_number("metric.final_loss", result.final_loss);
    record_miou(manifest, "metric.val.", result.validation.miou);
    manifest.set_number("time.train_s", result.train_seconds);
    manifest.set("output.checkpoint", (out / "model.ckpt").string());
    manifest.set("output.val_manifest", (out / "val" / "manifest.tsv").string());
}

} // namespace

void register_train_toy(CLI::App& app, int& exit_code) {
    struct Args {
        std::string config, arm, out;
        std::optional<std::size_t> steps;
        std::uint64_t seed = 0;
    };
    auto args = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("train-toy", "Train the Nano model on the synthetic depth-ambiguous scenes");
    cmd->add_option("--config", args->config, "key = value run config (defaults to the built-in Nano recipe)");
    cmd->add_option("--steps", args->steps, "Override the configured step count");
    cmd->add_option("--arm", args->arm, "vanilla, depth-only, spatial-only, both or both-axial")
        ->check(CLI::IsMember({"vanilla", "depth-only", "spatial-only", "both", "both-axial"}));
    cmd->add_option("--seed", args->seed, "Seed for weights, data and batch order");
    cmd->add_option("--out", args->out, "Output directory (default: toy-<arm>-s<seed>)");
    cmd->callback([args, &exit_code] {
        const Stopwatch clock;
        RunConfig config = args->config.empty() ? RunConfig{} : load_run_config(args->config);
        if (!args->arm.empty()) apply_arm(config.model, parse_arm(args->arm));
        if (args->steps) config.train.steps = *args->steps;
        config.model.validate();
        config.train.validate();
        const std::string arm = args->arm.empty() ? "config" : args->arm;
        const std::filesystem::path out =
            args->out.empty() ? "toy-" + arm + "-s" + std::to_string(args->seed) : args->out;
        std::filesystem::create_directories(out);

        auto manifest = begin_manifest("train-toy", args->seed, config.train.precision);
        manifest.set("arg.arm", arm);
        if (!args->config.empty()) manifest.set("arg.config", args->config);
        echo_config(manifest, format_run_config(config));
        if (config.train.precision == Precision::Wide) {
            train_and_save<double>(config, args->seed, out, manifest);
        } else {
            train_and_save<float>(config, args->seed, out, manifest);
        }
        finish_manifest(manifest, out / "manifest.txt", clock);
        exit_code = kOk;
    });
}

} // namespace dfv2::cli
