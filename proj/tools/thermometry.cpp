// thermometry: command-line front end for scenario sweeps, bound checks and the reference TEMPO sweeps.

#include "thermo/parallel.hpp"
#include "thermo/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitVerify = 4;

void print_files(const std::vector<std::string>& files, bool quiet) {
    if (quiet) return;
    for (const auto& f : files) std::cout << "wrote " << f << '\n';
}

void require_two_decades(const thermo::Scenario& sc) {
    if (sc.grid.t_max < 99.9 * sc.grid.t_min) {
        throw thermo::ConfigError(sc.source, sc.grid_line,
                                  "[grid] t_min: bound checks need a grid spanning at least two decades");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-temperature thermometry: Fisher information sweeps, scaling bounds and TEMPO dynamics"};
    app.require_subcommand(1);

    thermo::RunOptions opts;
    opts.jobs = thermo::default_jobs();
    opts.quiet = false;
    app.add_option("--jobs,-j", opts.jobs, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);
    app.add_option("--out,-o", opts.out_dir, "Output directory")->capture_default_str();
    app.add_flag("--quiet,-q", opts.quiet, "Suppress the summary on stdout");

    std::string config;
    auto* run = app.add_subcommand("run", "Evaluate a scenario config and write CSV plus summary");
    run->add_option("config", config, "Scenario config file")->required();
    auto* bounds = app.add_subcommand("bounds", "Evaluate a scenario and check the scaling bounds");
    bounds->add_option("config", config, "Scenario config file")->required();
    auto* validate = app.add_subcommand("validate", "Parse and validate a scenario config only");
    validate->add_option("config", config, "Scenario config file")->required();
    std::string variant;
    auto* fig3 = app.add_subcommand("fig3", "TEMPO Fisher sweep for the ohmic or sub-ohmic reference bath");
    fig3->add_option("variant", variant, "ohmic or subohmic")->required()->check(CLI::IsMember({"ohmic", "subohmic"}));
    for (auto* sub : {run, bounds, validate, fig3}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*fig3) {
            const auto report = thermo::reproduce_figure3(variant, opts);
            if (!opts.quiet) std::cout << report.text();
            print_files(report.files, opts.quiet);
            return report.slope_pass ? 0 : kExitVerify;
        }
        const auto scenario = thermo::load_scenario(config);
        if (*validate) {
            if (!opts.quiet) {
                std::cout << config << ": ok (" << thermo::to_string(scenario.kind) << ", "
                          << scenario.grid.points << " grid points)\n";
            }
            return 0;
        }
        if (*bounds) require_two_decades(scenario);
        const auto result = thermo::run_scenario(scenario, opts);
        if (!opts.quiet) std::cout << result.summary;
        print_files(result.files, opts.quiet);
        if (*bounds) {
            const auto report = thermo::verify_bounds(thermo::bounds_input(scenario, result));
            if (!opts.quiet) std::cout << report.text();
            return report.pass ? 0 : kExitVerify;
        }
        return 0;
    } catch (const thermo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const thermo::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
