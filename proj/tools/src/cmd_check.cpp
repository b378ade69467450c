#include <cstdio>
#include <iostream>
#include <memory>

#include "commands.hpp"
#include "common.hpp"
#include "dfv2/checks.hpp"

namespace dfv2::cli {

void register_check(CLI::App& app, int& exit_code) {
    struct Args {
        std::string suite = "all";
        std::uint64_t seed = CheckOptions{}.seed;
        std::optional<double> inject_beta;
        std::string manifest;
    };
    auto args = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("check", "Run the invariant and gradient suites");
    cmd->add_option("--suite", args->suite, "priors, attention, gradients or all")
        ->check(CLI::IsMember({"priors", "attention", "gradients", "all"}));
    cmd->add_option("--seed", args->seed, "Base seed of the generated cases");
    cmd->add_option("--inject-beta", args->inject_beta,
                    "Fault injection: replace every decay rate in the priors suite");
    cmd->add_option("--run-manifest", args->manifest, "Where to write the run manifest");
    cmd->callback([args, &exit_code] {
        const Stopwatch clock;
        CheckOptions options;
        options.seed = args->seed;
        options.inject_beta = args->inject_beta;
        const auto results = run_checks(parse_check_suite(args->suite), options);

        auto manifest = begin_manifest("check", args->seed, Precision::Wide);
        manifest.set("arg.suite", args->suite);
        if (args->inject_beta) manifest.set_number("arg.inject_beta", *args->inject_beta);
        bool all_passed = true;
        for (const auto& r : results) {
            const std::string key = r.suite + "." + r.name;
            char line[256];
            std::snprintf(line, sizeof line, "%-4s %-42s worst=%-10.3g tol=%-8.3g cases=%zu", r.passed ? "PASS" : "FAIL",
                          key.c_str(), r.worst, r.tolerance, r.cases);
            std::cout << line;
            if (!r.passed) {
                std::cout << " counterexample_seed=" << *r.counterexample;
                if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
            }
            std::cout << "\n";
            manifest.set("metric." + key + ".status", r.passed ? "pass" : "fail");
            manifest.set_number("metric." + key + ".worst", r.worst);
            if (!r.passed) manifest.set_int("metric." + key + ".counterexample_seed",
                                            static_cast<long long>(*r.counterexample));
            all_passed = all_passed && r.passed;
        }
        std::cout << (all_passed ? "all invariants hold" : "invariant violations found") << "\n";
        manifest.set("metric.all_passed", all_passed ? "true" : "false");
        finish_manifest(manifest, manifest_path("check", args->manifest), clock);
        exit_code = all_passed ? kOk : kFailure;
    });
}

} // namespace dfv2::cli
