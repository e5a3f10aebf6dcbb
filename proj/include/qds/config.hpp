#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "qds/channel_model.hpp"
#include "qds/security.hpp"

// Run configuration: a flat dotted-key file format, parsed strictly (unknown
// keys and malformed values are errors carrying their line number).

namespace qds {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scenario knobs for `simulate`.
struct SimSettings {
    std::uint64_t L = 0;
    double s_a = 0.0;
    double s_v = 0.0;
    double e_b = 0.0;
    double e_c = 0.0;
    double forger_error_rate = 0.0;
    double n_pulses = 0.0;      // honest-scenario pulses per trial
    std::uint64_t trials = 0;   // default when --trials is not given
};

struct RunConfig {
    ChannelParams channel;
    DecoySettings decoy;
    SecurityParams security;
    AnalysisOptions analysis;
    // Exactly one of these drives `analyze`: a fixed pulse budget, or a
    // target security level to search the minimal signature length for.
    std::optional<double> n_pulses;
    std::optional<double> target_level;
    SimSettings sim;
    std::string config_text;  // verbatim input, embedded in reports
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace qds
