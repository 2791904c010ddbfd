#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "elacu/runner.hpp"

int main(int argc, char** argv) {
    using namespace elacu;
    CLI::App app{"elacu: coupled elasto-acoustic spectral element solver"};
    app.require_subcommand(1, 1);

    RunnerOptions opts;
    int threads = 1;
    app.add_option("--output-dir", opts.output_dir, "directory for CSV and VTK output");
    app.add_flag("--quiet", opts.quiet, "suppress progress on standard output");
    app.add_option("--threads", threads, "worker threads (the solver runs sequentially)")->check(CLI::PositiveNumber);

    std::string config;
    int levels = 3;
    auto* run = app.add_subcommand("run", "single simulation of the configured case");
    run->add_option("--config", config, "JSON configuration")->required();
    auto* conv = app.add_subcommand("converge", "convergence study over levels 0..L-1");
    conv->add_option("--config", config, "JSON configuration")->required();
    conv->add_option("--levels", levels, "number of mesh levels")->required();
    auto* demo = app.add_subcommand("demo", "reduced physical demonstration");
    demo->add_option("--config", config, "JSON configuration")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        RunConfig c = load_config(config);
        if (run->parsed()) return cmd_run(c, opts);
        if (conv->parsed()) return cmd_converge(c, levels, opts);
        return cmd_demo(c, opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const MaterialError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const GeometryError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const StepFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const InstabilityError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const SolverError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
