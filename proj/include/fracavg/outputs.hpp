#pragma once

#include <string>

#include "fracavg/config.hpp"
#include "fracavg/experiments.hpp"

namespace fracavg {

// Shortest round-trip representation ("%.17g"); NaN prints as an empty field.
std::string format_number(double x);

// name,estimate,stderr,target,z,pass; a header-only table for an empty report.
std::string report_csv(const StatReport& rep);
json report_json(const StatReport& rep);
StatReport report_from_json(const json& j);
// Python/matplotlib script that reads the CSV next to it.
std::string plot_script(const StatReport& rep);

// Writes <dir>/<experiment>.csv, .json, plot_<experiment>.py, the extra
// files and resolved_config.json. Creates dir. Throws config_error naming
// the path on I/O failure.
void emit_outputs(const StatReport& rep, const ExperimentConfig& cfg, const std::string& dir);

// Fixed-width table (name, value, target, pass) for terminal output.
std::string report_table(const StatReport& rep);

}  // namespace fracavg
