#include <iostream>

#include <CLI11.hpp>

#include "gcprobe/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"gcprobe: numerical checks for linear and pointwise generalized complex geometry"};
    app.set_version_flag("--version", GCPROBE_VERSION);
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a scenario and write its report");
    std::string scenario;
    double tol = 0.0, fd_step = 0.0;
    std::uint64_t seed = 0;
    std::string report, format;
    run->add_option("scenario", scenario, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
    auto* tol_opt = run->add_option("--tol", tol, "override the tolerance table (fd_step and strictness excepted)");
    auto* fd_opt = run->add_option("--fd-step", fd_step, "relative finite-difference step");
    auto* seed_opt = run->add_option("--seed", seed, "base seed");
    auto* report_opt = run->add_option("--report", report, "report path; '-' for standard output");
    auto* format_opt =
        run->add_option("--format", format, "report format")->check(CLI::IsMember({"structured", "tabular"}));

    auto* ops = app.add_subcommand("ops", "list the known check operations");

    CLI11_PARSE(app, argc, argv);

    if (ops->parsed()) {
        for (const auto& name : gcprobe::known_operations()) {
            std::cout << name << "\n";
        }
        return 0;
    }

    gcprobe::RunOverrides o;
    if (*tol_opt) {
        o.tol = tol;
    }
    if (*fd_opt) {
        o.fd_step = fd_step;
    }
    if (*seed_opt) {
        o.seed = seed;
    }
    const bool to_stdout = *report_opt && report == "-";
    if (*report_opt && !to_stdout) {
        o.report_path = report;
    }
    try {
        if (*format_opt) {
            o.format = gcprobe::parse_format(format);
        }
        const gcprobe::RunResult r = gcprobe::run_scenario_file(scenario, o);
        if (to_stdout) {
            std::cout << gcprobe::format_report(r.report, r.format);
        }
        const auto& summary = r.report.at("summary");
        for (const auto& check : r.report.at("checks")) {
            if (!check.at("passed").get<bool>()) {
                std::cerr << "FAIL " << check.at("name").get<std::string>() << ": verdict " << check.at("verdict").dump()
                          << ", expected " << check.at("expect").dump();
                if (!check.at("error").is_null()) {
                    std::cerr << " (error: " << check.at("error").get<std::string>() << ")";
                }
                std::cerr << "\n";
            }
        }
        std::cerr << summary.at("passed").get<std::size_t>() << "/" << summary.at("checks").get<std::size_t>()
                  << " checks as expected";
        if (!r.report_path.empty()) {
            std::cerr << ", report written to " << r.report_path;
        }
        std::cerr << "\n";
        return r.all_passed ? 0 : 1;
    } catch (const gcprobe::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
