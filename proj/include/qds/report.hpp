#pragma once

#include <string>
#include <vector>

#include "qds/config.hpp"
#include "qds/security.hpp"

// Serialization of analysis results: a self-reproducing JSON report (it
// embeds the verbatim config text that generated it) and fixed-schema CSV
// helpers. All output is deterministic for identical inputs.

namespace qds {

inline constexpr const char* kToolName = "qds";
inline constexpr const char* kToolVersion = "1.0.0";

// Shortest-precision general format used in every CSV cell ("%.12g").
std::string format_g12(double value);

// Joins cells with commas and an LF terminator; cells must be comma-free.
std::string csv_line(const std::vector<std::string>& cells);

// Full analyze report. `mode` is "fixed_pulses" or "search". Probabilities
// appear twice: capped to 1 in linear form, uncapped in log2 form.
std::string render_analyze_report(const RunConfig& config, const SecurityReport& report,
                                  const std::string& mode);

}  // namespace qds
