#include "qds/report.hpp"

#include <cstdio>

#include "json.hpp"
#include "qds/math_kernel.hpp"

namespace qds {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json probability_pair(double log2_value) {
    return ordered_json{{"linear", linear_capped(log2_value)}, {"log2", log2_value}};
}

const char* sifting_name(SiftingConvention convention) {
    return convention == SiftingConvention::squared_px ? "squared_px" : "single_px";
}

const char* z_delta_name(ZDeltaSample sample) {
    return sample == ZDeltaSample::z_total ? "z_total" : "l_half";
}

}  // namespace

std::string format_g12(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.12g", value);
    return buffer;
}

std::string csv_line(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) line += ',';
        line += cells[i];
    }
    line += '\n';
    return line;
}

std::string render_analyze_report(const RunConfig& config, const SecurityReport& report,
                                  const std::string& mode) {
    ordered_json doc;
    doc["report_type"] = "analyze";
    doc["tool"] = {{"name", kToolName}, {"version", kToolVersion}};

    ordered_json provenance;
    provenance["mode"] = mode;
    provenance["seed"] = nullptr;  // analysis is deterministic; no randomness consumed
    provenance["sifting"] = sifting_name(config.analysis.sifting);
    provenance["z_delta_sample"] = z_delta_name(config.analysis.estimator.z_delta_sample);
    provenance["gamma_clamp"] = config.analysis.estimator.gamma.clamp_log_arg;
    provenance["f_ec"] = config.analysis.f_ec;
    provenance["k_fraction"] = config.analysis.k_fraction;
    provenance["min_entropy_offset_bits"] = config.analysis.min_entropy_offset_bits;
    provenance["warnings"] = report.warnings;
    doc["provenance"] = provenance;

    doc["config_text"] = config.config_text;

    doc["channel"] = {
        {"distance_km", config.channel.distance_km},
        {"attenuation_db_per_km", config.channel.attenuation_db_per_km},
        {"receiver_loss_db", config.channel.receiver_loss_db},
        {"detector_efficiency", config.channel.detector_efficiency},
        {"dark_count_prob", config.channel.dark_count_prob},
        {"optical_error_x", config.channel.optical_error_x},
        {"optical_error_z", config.channel.optical_error_z},
        {"pulse_rate_hz", config.channel.pulse_rate_hz},
    };
    doc["decoy"] = {
        {"intensities", config.decoy.intensities},
        {"intensity_probs", config.decoy.intensity_probs},
        {"basis_prob_x", config.decoy.basis_prob_x},
    };
    doc["security_params"] = {
        {"eps_pe", config.security.eps_pe},
        {"eps_smooth", config.security.eps_smooth},
        {"markov_a", config.security.markov_a},
        {"alpha1", config.security.alpha1},
        {"target_level", config.security.target_level},
    };

    ordered_json result;
    result["feasible"] = report.feasible;
    result["n_pulses"] = report.n_pulses;
    result["pulse_time_seconds"] =
        config.channel.pulse_rate_hz > 0.0 ? report.n_pulses / config.channel.pulse_rate_hz : 0.0;
    result["raw_x_expected"] = report.raw_x_expected;
    result["L"] = report.L;
    result["k"] = report.k;
    result["n"] = report.L / 2;
    result["e_x_upper"] = report.e_x_upper;
    result["p_e"] = report.p_e;
    result["s_a"] = report.s_a;
    result["s_v"] = report.s_v;
    result["h_min_bits"] = report.h_min;
    result["p_abort"] = probability_pair(report.p_abort_log2);
    result["p_forge"] = probability_pair(report.p_forge_log2);
    result["p_repudiate"] = probability_pair(report.p_repud_log2);
    result["qkd_key_length"] = report.qkd_key_length;

    const FiniteSizeEstimates& est = report.estimates;
    result["estimates"] = {
        {"s_x0_lower", est.s_x0_lower},
        {"s_x1_lower", est.s_x1_lower},
        {"s_x0_sample", est.s_x0_sample},
        {"s_x1_sample", est.s_x1_sample},
        {"s_z0_lower", est.s_z0_lower},
        {"s_z1_lower", est.s_z1_lower},
        {"v_z1_upper", est.v_z1_upper},
        {"phi_x1_upper", est.phi_x1_upper},
        {"e_x_upper", est.e_x_upper},
        {"tau0", est.tau0},
        {"tau1", est.tau1},
        {"delta_x", est.delta_x},
        {"delta_z_counts", est.delta_z_counts},
        {"delta_z_errors", est.delta_z_errors},
        {"failure_budget", est.failure_budget},
    };
    doc["result"] = result;

    return doc.dump(2) + "\n";
}

}  // namespace qds
