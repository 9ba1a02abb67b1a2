// ctrlrand solve   --config exp.ini [--output-dir DIR] [--threads N]
// ctrlrand oracle  --problem lq1d [--param k=v]... [--reference fd]
// ctrlrand rates   --input errors.csv [--output-dir DIR]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include "ctrlrand/error.hpp"
#include "ctrlrand/format.hpp"
#include "ctrlrand/harness.hpp"
#include "ctrlrand/problems.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace ctrlrand;

Execution execution_for(int threads)
{
    if (threads == 1) {
        return Execution::serial();
    }
    return Execution::parallel(threads);
}

int cmd_solve(const std::string& config, const std::string& output_dir, int threads)
{
    ExperimentConfig cfg = load_config(config);
    if (!output_dir.empty()) {
        cfg.output_dir = output_dir;
    }
    if (threads >= 0) {
        cfg.exec = execution_for(threads);
    }
    const ErrorReport report = run_experiment(cfg, &std::cerr);
    emit_report(report, cfg.output_dir);
    std::cout << "wrote " << (cfg.output_dir / "errors.csv").string() << '\n';
    for (const auto& r : report.rates) {
        std::cout << r.quantity << " slope " << g17(r.slope) << '\n';
    }
    return report.has_failures() ? 2 : 0;
}

int cmd_oracle(const std::string& problem, const std::vector<std::string>& params,
               const std::string& reference, int control_points)
{
    ProblemSpec spec;
    spec.name = problem;
    spec.control_points = control_points;
    for (const auto& kv : params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--param expects key=value, got '" + kv + "'");
        }
        const std::string value = kv.substr(eq + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != value.size() || value.empty()) {
            throw ConfigError("--param " + kv.substr(0, eq) + ": not a number");
        }
        spec.params[kv.substr(0, eq)] = v;
    }
    (void)make_named_problem(spec);
    const ReferenceKind kind = reference.empty() ? default_reference(problem) : parse_reference(reference);
    std::cout << g17(reference_value(spec, kind)) << '\n';
    return 0;
}

int cmd_rates(const std::string& input, const std::string& output_dir)
{
    std::ifstream in(input);
    if (!in) {
        throw ConfigError("cannot open " + input);
    }
    const auto rates = fit_rates(read_errors_csv(in));
    write_rates_csv(rates, std::cout);
    if (!output_dir.empty()) {
        std::filesystem::create_directories(output_dir);
        std::ofstream os(std::filesystem::path(output_dir) / "rates.csv");
        write_rates_csv(rates, os);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Monte-Carlo regression solver for control-randomized HJB equations"};
    app.require_subcommand(1);

    int threads = -1;
    std::string output_dir;
    app.add_option("--threads", threads, "OpenMP threads (1 runs the serial reference path)");
    app.add_option("--output-dir", output_dir, "Directory for output files");

    std::string config;
    auto* solve = app.add_subcommand("solve", "Run a configured grid and seed sweep");
    solve->add_option("--config", config, "Experiment file")->required();

    std::string problem;
    std::vector<std::string> params;
    std::string reference;
    int control_points = 21;
    auto* oracle = app.add_subcommand("oracle", "Print the reference value v(0, x0) of a named problem");
    oracle->add_option("--problem", problem, "lq1d, bsb_call or nocontrol_gbm")->required();
    oracle->add_option("--param", params, "Problem parameter override key=value");
    oracle->add_option("--reference", reference, "riccati, bsb, fd or mc_nocontrol");
    oracle->add_option("--control-points", control_points, "Control grid points");

    std::string input;
    auto* rates = app.add_subcommand("rates", "Refit log-log slopes from an errors.csv");
    rates->add_option("--input", input, "errors.csv")->required();

    // subcommand-local copies so options work before or after the subcommand
    for (auto* sub : {solve, oracle, rates}) {
        sub->add_option("--threads", threads, "OpenMP threads");
        sub->add_option("--output-dir", output_dir, "Directory for output files");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*solve) {
            return cmd_solve(config, output_dir, threads);
        }
        if (*oracle) {
            return cmd_oracle(problem, params, reference, control_points);
        }
        return cmd_rates(input, output_dir);
    } catch (const ctrlrand::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
