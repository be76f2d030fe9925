#pragma once

// Declarative scenarios: named models, linear maps, structure fields,
// expressions and Poisson maps, followed by an ordered list of checks. A
// scenario is a JSON document; the report is JSON with a fixed key order
// (schema "gcprobe-report/1"), or CSV with one row per (check, sample).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcprobe/subspace.hpp"

namespace gcprobe {

inline constexpr const char* kReportSchema = "gcprobe-report/1";

/// Load-time failure: malformed document, unknown operation or unresolved
/// name. line and column are 1-based and 0 when not applicable.
class ScenarioError : public InputError {
public:
    ScenarioError(const std::string& message, std::size_t line = 0, std::size_t column = 0);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

enum class ReportFormat { structured, tabular };

struct RunOverrides {
    std::optional<double> tol;
    std::optional<double> fd_step;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> report_path;
    std::optional<ReportFormat> format;
};

struct RunResult {
    nlohmann::ordered_json report;
    bool all_passed = false;
    std::string report_path;  // empty when nothing was written
    ReportFormat format = ReportFormat::structured;
};

std::vector<std::string> known_operations();

/// Runs a scenario given as text. Relative report paths resolve against
/// base_dir. Nothing is written unless a report path is set.
RunResult run_scenario_text(const std::string& text, const RunOverrides& overrides = {},
                            const std::string& base_dir = ".");
RunResult run_scenario_file(const std::string& path, const RunOverrides& overrides = {});

/// Report serialized without the timings section.
std::string report_body(const nlohmann::ordered_json& report);
std::string format_report(const nlohmann::ordered_json& report, ReportFormat format);
std::string tabular_report(const nlohmann::ordered_json& report);

ReportFormat parse_format(const std::string& name);

}  // namespace gcprobe
