#include "qds/channel_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qds {

void ChannelParams::validate() const {
    auto fail = [](const std::string& what) { throw std::domain_error("channel: " + what); };
    if (!(distance_km >= 0.0)) fail("distance_km must be >= 0");
    if (!(attenuation_db_per_km >= 0.0)) fail("attenuation_db_per_km must be >= 0");
    if (!(receiver_loss_db >= 0.0)) fail("receiver_loss_db must be >= 0");
    if (!(detector_efficiency > 0.0) || !(detector_efficiency <= 1.0))
        fail("detector_efficiency must lie in (0,1]");
    if (!(dark_count_prob >= 0.0) || !(dark_count_prob <= 1.0))
        fail("dark_count_prob must lie in [0,1]");
    if (!(optical_error_x >= 0.0) || !(optical_error_x <= 1.0))
        fail("optical_error_x must lie in [0,1]");
    if (!(optical_error_z >= 0.0) || !(optical_error_z <= 1.0))
        fail("optical_error_z must lie in [0,1]");
    if (!(pulse_rate_hz > 0.0)) fail("pulse_rate_hz must be positive");
}

void DecoySettings::validate() const {
    auto fail = [](const std::string& what) { throw std::domain_error("decoy: " + what); };
    double u1 = intensities[0], u2 = intensities[1], u3 = intensities[2];
    if (!(u1 > u2) || !(u2 > u3) || !(u3 >= 0.0))
        fail("intensities must satisfy u1 > u2 > u3 >= 0");
    if (!(u1 > u2 + u3)) fail("intensities must satisfy u1 > u2 + u3");
    for (double p : intensity_probs) {
        if (!(p > 0.0) || !(p < 1.0)) fail("intensity probabilities must lie in (0,1)");
    }
    double sum = intensity_probs[0] + intensity_probs[1] + intensity_probs[2];
    if (std::abs(sum - 1.0) > 1e-12) fail("intensity probabilities must sum to 1");
    if (!(basis_prob_x >= 0.5) || !(basis_prob_x < 1.0)) fail("basis_prob_x must lie in [0.5, 1)");
}

double system_transmittance(const ChannelParams& params) {
    double total_db = params.attenuation_db_per_km * params.distance_km + params.receiver_loss_db;
    return params.detector_efficiency * std::pow(10.0, -total_db / 10.0);
}

double detection_rate(double u, double eta, double p_d) {
    return 1.0 - (1.0 - 2.0 * p_d) * std::exp(-u * eta);
}

double bit_error_rate(double u, double eta, double p_d, double q) {
    double r = detection_rate(u, eta, p_d);
    if (r <= 0.0) {
        throw std::domain_error("bit_error_rate: detection rate vanishes at u=" +
                                std::to_string(u));
    }
    double t = std::exp(-u * eta);
    return ((1.0 - t) * q + t * p_d) / r;
}

double photon_yield(unsigned n_photons, double eta, double p_d) {
    return 1.0 - (1.0 - 2.0 * p_d) * std::pow(1.0 - eta, n_photons);
}

double photon_error_weight(unsigned n_photons, double eta, double p_d, double q) {
    double miss = std::pow(1.0 - eta, n_photons);
    return (1.0 - miss) * q + miss * p_d;
}

double poisson_pmf(double u, unsigned n_photons) {
    if (!(u >= 0.0)) throw std::domain_error("poisson_pmf: intensity must be >= 0");
    if (u == 0.0) return n_photons == 0 ? 1.0 : 0.0;
    double log_p = -u + n_photons * std::log(u) - std::lgamma(static_cast<double>(n_photons) + 1.0);
    return std::exp(log_p);
}

double tau(unsigned n_photons, const DecoySettings& decoy) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
        acc += decoy.intensity_probs[i] * poisson_pmf(decoy.intensities[i], n_photons);
    }
    return acc;
}

ExpectedStatistics expected_statistics(double n_pulses, const ChannelParams& params,
                                       const DecoySettings& decoy, SiftingConvention sifting) {
    params.validate();
    decoy.validate();
    if (!(n_pulses >= 0.0)) throw std::domain_error("expected_statistics: n_pulses must be >= 0");
    double px = decoy.basis_prob_x;
    double pz = 1.0 - px;
    double sieve_x = px;
    double sieve_z = pz;
    if (sifting == SiftingConvention::squared_px) {
        sieve_x = px * px;
        sieve_z = pz * pz;
    }
    double eta = system_transmittance(params);
    ExpectedStatistics out;
    double err_weighted = 0.0;
    for (int i = 0; i < 3; ++i) {
        double u = decoy.intensities[i];
        double pu = decoy.intensity_probs[i];
        double r = detection_rate(u, eta, params.dark_count_prob);
        out.detection_rate[i] = r;
        out.x_sifted_counts[i] = n_pulses * pu * r * sieve_x;
        out.z_sifted_counts[i] = n_pulses * pu * r * sieve_z;
        out.x_error_rate[i] = bit_error_rate(u, eta, params.dark_count_prob, params.optical_error_x);
        out.z_error_rate[i] = bit_error_rate(u, eta, params.dark_count_prob, params.optical_error_z);
        out.expected_x_raw += out.x_sifted_counts[i];
        err_weighted += out.x_sifted_counts[i] * out.x_error_rate[i];
    }
    out.expected_observed_ex = out.expected_x_raw > 0.0 ? err_weighted / out.expected_x_raw : 0.0;
    return out;
}

}  // namespace qds
