#include "qds/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace qds {
namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

[[noreturn]] void fail(int line, const std::string& message) {
    throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

double parse_double(const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const double parsed = std::stod(value, &used);
        if (used != value.size()) fail(line, "trailing characters after number '" + value + "'");
        return parsed;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(line, "expected a number, got '" + value + "'");
    }
}

std::uint64_t parse_count(const std::string& value, int line) {
    const double parsed = parse_double(value, line);
    if (parsed < 0.0 || parsed != std::floor(parsed) || parsed > 9.0e18)
        fail(line, "expected a non-negative integer, got '" + value + "'");
    return static_cast<std::uint64_t>(parsed);
}

bool parse_bool(const std::string& value, int line) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(line, "expected true/false, got '" + value + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig config;
    config.config_text = text;
    bool saw_alpha1 = false;

    using Handler = std::function<void(RunConfig&, const std::string&, int)>;
    const std::map<std::string, Handler> handlers = {
        {"channel.distance_km", [](RunConfig& c, const std::string& v, int l) { c.channel.distance_km = parse_double(v, l); }},
        {"channel.attenuation_db_per_km", [](RunConfig& c, const std::string& v, int l) { c.channel.attenuation_db_per_km = parse_double(v, l); }},
        {"channel.receiver_loss_db", [](RunConfig& c, const std::string& v, int l) { c.channel.receiver_loss_db = parse_double(v, l); }},
        {"channel.detector_efficiency", [](RunConfig& c, const std::string& v, int l) { c.channel.detector_efficiency = parse_double(v, l); }},
        {"channel.dark_count_prob", [](RunConfig& c, const std::string& v, int l) { c.channel.dark_count_prob = parse_double(v, l); }},
        {"channel.optical_error_x", [](RunConfig& c, const std::string& v, int l) { c.channel.optical_error_x = parse_double(v, l); }},
        {"channel.optical_error_z", [](RunConfig& c, const std::string& v, int l) { c.channel.optical_error_z = parse_double(v, l); }},
        {"channel.pulse_rate_hz", [](RunConfig& c, const std::string& v, int l) { c.channel.pulse_rate_hz = parse_double(v, l); }},
        {"decoy.u1", [](RunConfig& c, const std::string& v, int l) { c.decoy.intensities[0] = parse_double(v, l); }},
        {"decoy.u2", [](RunConfig& c, const std::string& v, int l) { c.decoy.intensities[1] = parse_double(v, l); }},
        {"decoy.u3", [](RunConfig& c, const std::string& v, int l) { c.decoy.intensities[2] = parse_double(v, l); }},
        {"decoy.p_u1", [](RunConfig& c, const std::string& v, int l) { c.decoy.intensity_probs[0] = parse_double(v, l); }},
        {"decoy.p_u2", [](RunConfig& c, const std::string& v, int l) { c.decoy.intensity_probs[1] = parse_double(v, l); }},
        {"decoy.p_u3", [](RunConfig& c, const std::string& v, int l) { c.decoy.intensity_probs[2] = parse_double(v, l); }},
        {"decoy.p_x", [](RunConfig& c, const std::string& v, int l) { c.decoy.basis_prob_x = parse_double(v, l); }},
        {"security.eps_pe", [](RunConfig& c, const std::string& v, int l) { c.security.eps_pe = parse_double(v, l); }},
        {"security.eps_smooth", [](RunConfig& c, const std::string& v, int l) { c.security.eps_smooth = parse_double(v, l); }},
        {"security.markov_a", [](RunConfig& c, const std::string& v, int l) { c.security.markov_a = parse_double(v, l); }},
        {"security.alpha1", [&saw_alpha1](RunConfig& c, const std::string& v, int l) {
             c.security.alpha1 = parse_double(v, l);
             saw_alpha1 = true;
         }},
        {"security.target_level", [](RunConfig& c, const std::string& v, int l) { c.security.target_level = parse_double(v, l); }},
        {"analysis.sifting", [](RunConfig& c, const std::string& v, int l) {
             if (v == "single_px") c.analysis.sifting = SiftingConvention::single_px;
             else if (v == "squared_px") c.analysis.sifting = SiftingConvention::squared_px;
             else fail(l, "analysis.sifting must be single_px or squared_px");
         }},
        {"analysis.z_delta_sample", [](RunConfig& c, const std::string& v, int l) {
             if (v == "l_half") c.analysis.estimator.z_delta_sample = ZDeltaSample::l_half;
             else if (v == "z_total") c.analysis.estimator.z_delta_sample = ZDeltaSample::z_total;
             else fail(l, "analysis.z_delta_sample must be l_half or z_total");
         }},
        {"analysis.gamma_clamp", [](RunConfig& c, const std::string& v, int l) {
             c.analysis.estimator.gamma.clamp_log_arg = parse_bool(v, l);
         }},
        {"analysis.f_ec", [](RunConfig& c, const std::string& v, int l) { c.analysis.f_ec = parse_double(v, l); }},
        {"analysis.k_fraction", [](RunConfig& c, const std::string& v, int l) { c.analysis.k_fraction = parse_double(v, l); }},
        {"analysis.min_entropy_offset_bits", [](RunConfig& c, const std::string& v, int l) { c.analysis.min_entropy_offset_bits = parse_double(v, l); }},
        {"run.n_pulses", [](RunConfig& c, const std::string& v, int l) { c.n_pulses = parse_double(v, l); }},
        {"run.target_level", [](RunConfig& c, const std::string& v, int l) {
             c.target_level = parse_double(v, l);
             c.security.target_level = *c.target_level;
         }},
        {"sim.l", [](RunConfig& c, const std::string& v, int l) { c.sim.L = parse_count(v, l); }},
        {"sim.s_a", [](RunConfig& c, const std::string& v, int l) { c.sim.s_a = parse_double(v, l); }},
        {"sim.s_v", [](RunConfig& c, const std::string& v, int l) { c.sim.s_v = parse_double(v, l); }},
        {"sim.e_b", [](RunConfig& c, const std::string& v, int l) { c.sim.e_b = parse_double(v, l); }},
        {"sim.e_c", [](RunConfig& c, const std::string& v, int l) { c.sim.e_c = parse_double(v, l); }},
        {"sim.forger_error_rate", [](RunConfig& c, const std::string& v, int l) { c.sim.forger_error_rate = parse_double(v, l); }},
        {"sim.n_pulses", [](RunConfig& c, const std::string& v, int l) { c.sim.n_pulses = parse_double(v, l); }},
        {"sim.trials", [](RunConfig& c, const std::string& v, int l) { c.sim.trials = parse_count(v, l); }},
    };

    std::istringstream stream(text);
    std::string raw_line;
    int line_number = 0;
    while (std::getline(stream, raw_line)) {
        ++line_number;
        const std::size_t hash = raw_line.find('#');
        if (hash != std::string::npos) raw_line.erase(hash);
        const std::string line = trim(raw_line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(line_number, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(line_number, "empty key");
        if (value.empty()) fail(line_number, "empty value for key '" + key + "'");
        const auto it = handlers.find(key);
        if (it == handlers.end()) fail(line_number, "unknown key '" + key + "'");
        it->second(config, value, line_number);
    }

    if (config.n_pulses && config.target_level)
        throw ConfigError("config: run.n_pulses and run.target_level are mutually exclusive");
    // The smoothing budget is split between the correction term and the rest
    // of the chain; when not pinned explicitly, give the correction its
    // largest admissible share.
    if (!saw_alpha1) config.security.alpha1 = config.security.eps_smooth / 2.0;
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return parse_config(buffer.str());
}

}  // namespace qds
