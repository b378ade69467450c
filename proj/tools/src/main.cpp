#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "common.hpp"
#include "dfv2/errors.hpp"

int main(int argc, char** argv) {
    using namespace dfv2;
    CLI::App app{"Geometry self-attention toolkit: priors, checks, benchmarks and toy training"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version_string()));
    int exit_code = cli::kOk;
    cli::register_gen_prior(app, exit_code);
    cli::register_check(app, exit_code);
    cli::register_bench(app, exit_code);
    cli::register_train_toy(app, exit_code);
    cli::register_eval(app, exit_code);
    cli::register_synth(app, exit_code);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kOk : cli::kUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kFailure;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kUsage;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kFailure;
    }
    return exit_code;
}
