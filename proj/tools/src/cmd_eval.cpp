#include <cstdio>
#include <iostream>
#include <memory>

#include "commands.hpp"
#include "common.hpp"
#include "dfv2/checkpoint.hpp"
#include "dfv2/training.hpp"

namespace dfv2::cli {

namespace {

template <typename T>
EvalResult evaluate_checkpoint(const std::string& checkpoint, const std::string& data_manifest,
                               const std::vector<RgbdSample>& samples) {
    const auto model = load_checkpoint<T>(checkpoint);
    const std::size_t k = model.config().num_classes;
    for (const auto& s : samples) {
        try {
            s.validate(k);
        } catch (const DataError& e) {
            throw UsageError("checkpoint " + checkpoint + " predicts " + std::to_string(k) +
                             " classes but sample '" + s.id + "' in " + data_manifest + " does not fit: " + e.what());
        }
    }
    return evaluate(model, samples);
}

} // namespace

void register_eval(CLI::App& app, int& exit_code) {
    struct Args {
        std::string checkpoint, manifest, run_manifest;
    };
    auto args = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("eval", "Single-scale evaluation of a checkpoint on a dataset manifest");
    cmd->add_option("--checkpoint", args->checkpoint, "Checkpoint written by train-toy")->required();
    cmd->add_option("--manifest", args->manifest, "Dataset manifest (id, rgb, depth, labels per line)")->required();
    cmd->add_option("--run-manifest", args->run_manifest, "Where to write the run manifest");
    cmd->callback([args, &exit_code] {
        const Stopwatch clock;
        const RunConfig config = load_run_config(checkpoint_config_path(args->checkpoint));
        const auto samples = load_manifest_samples(args->manifest);
        if (samples.empty()) throw UsageError(args->manifest + ": no samples");
        const auto result = config.train.precision == Precision::Wide
                                ? evaluate_checkpoint<double>(args->checkpoint, args->manifest, samples)
                                : evaluate_checkpoint<float>(args->checkpoint, args->manifest, samples);

        std::cout << "class\tiou\n";
        for (std::size_t k = 0; k < result.miou.per_class.size(); ++k) {
            const auto& iou = result.miou.per_class[k];
            if (iou) {
                std::printf("%zu\t%.6f\n", k, *iou);
            } else {
                std::printf("%zu\tn/a\n", k);
            }
        }
        std::printf("mean\t%.6f\n", result.miou.miou);
        std::fflush(stdout);

        auto manifest = begin_manifest("eval", 0, config.train.precision);
        manifest.set("arg.checkpoint", args->checkpoint);
        manifest.set("arg.manifest", args->manifest);
        echo_config(manifest, format_run_config(config));
        manifest.set_int("metric.samples", static_cast<long long>(samples.size()));
        record_miou(manifest, "metric.", result.miou);
        finish_manifest(manifest, manifest_path("eval", args->run_manifest), clock);
        exit_code = kOk;
    });
}

} // namespace dfv2::cli
