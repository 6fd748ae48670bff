#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pricer/commands.hpp"

namespace pricer {

inline ExperimentSpec load_spec_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw spec_error("cannot open spec file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_spec(buffer.str());
}

/**
 * Command-line front end.  Exit codes: 0 success, 1 runtime failure
 * (simulation errors, unreadable records, I/O), 2 configuration errors
 * (bad flags, unparseable or invalid spec).
 */
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    CLI::App app{"dynamic pricing simulation harness"};
    app.require_subcommand(1);

    std::string spec_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    auto* simulate = app.add_subcommand(
        "simulate", "run the configured experiment and write its artifacts");
    simulate->add_option("--spec", spec_path, "experiment spec file")
        ->required();
    simulate->add_option("--out", out_dir, "output directory (overrides the spec)");
    simulate->add_option("--seed", seed, "master seed (overrides the spec)")
        ->envname("PRICER_SEED");
    simulate->add_option("--workers", workers, "worker thread count")
        ->envname("PRICER_WORKERS");

    std::string records_path;
    ReportOptions report_options;
    auto* report = app.add_subcommand(
        "report", "tabulate per-item revenue deltas from recorded runs");
    report->add_option("--records", records_path, "records.jsonl from a simulation")
        ->required();
    report->add_option("--ks", report_options.ks, "eligibility thresholds")
        ->delimiter(',');
    report->add_option("--out", report_options.output_dir, "output directory");
    report->add_option("--baseline-policy", report_options.baseline_policy,
                       "policy providing the baseline window");
    report->add_option("--treatment-policy", report_options.treatment_policy,
                       "policy under evaluation");
    report->add_option("--baseline-window", report_options.baseline_window,
                       "days at the end of the baseline run");
    report->add_option("--threshold", report_options.forecast_threshold,
                       "forecast eligibility threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (simulate->parsed()) {
            auto spec = load_spec_file(spec_path);
            if (out_dir) spec.output_dir = *out_dir;
            if (seed) spec.market.seed = *seed;
            validate_spec(spec);
            unsigned count =
                workers.value_or(std::max(1u, std::thread::hardware_concurrency()));
            if (count < 1) throw spec_error("workers must be >= 1");
            auto artifacts = run_simulate(spec, count);
            out << "wrote " << artifacts.revenue_csv.string() << '\n'
                << "wrote " << artifacts.records_jsonl.string() << '\n'
                << "wrote " << artifacts.figure_csv.string() << '\n'
                << "wrote " << artifacts.summary_json.string() << '\n';
        } else {
            auto artifacts = run_report(records_path, report_options);
            out << "wrote " << artifacts.report_json.string() << '\n'
                << "wrote " << artifacts.report_csv.string() << '\n';
        }
    } catch (const spec_error& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace pricer
