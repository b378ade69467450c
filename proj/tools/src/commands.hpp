#pragma once

#include "CLI11.hpp"

namespace dfv2::cli {

// Each registers one subcommand. Callbacks store their exit status in
// `exit_code`; errors propagate as dfv2::Error and are mapped in main.
void register_gen_prior(CLI::App& app, int& exit_code);
void register_check(CLI::App& app, int& exit_code);
void register_bench(CLI::App& app, int& exit_code);
void register_train_toy(CLI::App& app, int& exit_code);
void register_eval(CLI::App& app, int& exit_code);
void register_synth(CLI::App& app, int& exit_code);

} // namespace dfv2::cli
