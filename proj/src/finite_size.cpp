#include "qds/finite_size.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qds {

void CountStatistics::validate() const {
    auto fail = [](const std::string& what) { throw std::domain_error("counts: " + what); };
    for (int i = 0; i < 3; ++i) {
        if (!(n_x[i] >= 0.0) || !(n_z[i] >= 0.0) || !(m_z[i] >= 0.0))
            fail("counts must be non-negative");
        if (m_z[i] > n_z[i]) fail("error count exceeds sifted count at intensity index " +
                                  std::to_string(i));
    }
    if (!(observed_ex >= 0.0) || !(observed_ex <= 1.0)) fail("observed_ex must lie in [0,1]");
    if (L % 2 != 0) fail("L must be even");
    if (n != L / 2) fail("n must equal L/2");
    double total = n_x[0] + n_x[1] + n_x[2];
    double expect = static_cast<double>(L) + static_cast<double>(k);
    // Expected-value inputs round L down to an even integer, so allow the
    // rounding slop on top of relative tolerance.
    if (std::abs(total - expect) > 1e-6 * expect + 3.0)
        fail("sifted X counts must sum to L + k");
}

CountBounds bound_observed_counts(double obs, double sample, double eps_pe) {
    if (!(obs >= 0.0) || obs > sample) {
        throw std::domain_error("bound_observed_counts: need 0 <= obs <= sample");
    }
    double delta = hoeffding_delta(sample, eps_pe);
    return {std::max(obs - delta, 0.0), obs + delta};
}

double decoy_s0_lower(const std::array<double, 3>& counts, const DecoySettings& decoy,
                      double delta) {
    const double u2 = decoy.intensities[1], u3 = decoy.intensities[2];
    const double p2 = decoy.intensity_probs[1], p3 = decoy.intensity_probs[2];
    if (!(u2 > u3)) throw std::domain_error("decoy_s0_lower: requires u2 > u3");
    // The n3 coefficient is positive and the n2 coefficient negative, so the
    // worst case takes n3 at its lower bound and n2 at its upper bound.
    double n3m = std::max(counts[2] - delta, 0.0);
    double n2p = counts[1] + delta;
    double t0 = tau(0, decoy);
    double val = t0 / (u2 - u3) *
                 (u2 * std::exp(u3) * n3m / p3 - u3 * std::exp(u2) * n2p / p2);
    return std::max(val, 0.0);
}

double decoy_s1_lower(const std::array<double, 3>& counts, const DecoySettings& decoy,
                      double s0, double delta) {
    const double u1 = decoy.intensities[0], u2 = decoy.intensities[1], u3 = decoy.intensities[2];
    const double p1 = decoy.intensity_probs[0], p2 = decoy.intensity_probs[1],
                 p3 = decoy.intensity_probs[2];
    double denom = u1 * (u2 - u3) - (u2 * u2 - u3 * u3);
    if (!(denom > 0.0)) {
        throw std::domain_error("decoy_s1_lower: requires u1(u2-u3) > u2^2-u3^2");
    }
    // Positive coefficient on n2, negative on n3 and n1 (the n1 term enters
    // through -(u2^2-u3^2)/u1^2 * e^{u1} n1 / p1).
    double n2m = std::max(counts[1] - delta, 0.0);
    double n3p = counts[2] + delta;
    double n1p = counts[0] + delta;
    double t0 = tau(0, decoy), t1 = tau(1, decoy);
    double val = u1 * t1 / denom *
                 (std::exp(u2) * n2m / p2 - std::exp(u3) * n3p / p3 +
                  (u2 * u2 - u3 * u3) / (u1 * u1) *
                      (s0 / t0 - std::exp(u1) * n1p / p1));
    return std::max(val, 0.0);
}

double decoy_v1_upper(const std::array<double, 3>& counts, const DecoySettings& decoy,
                      double delta) {
    const double u2 = decoy.intensities[1], u3 = decoy.intensities[2];
    const double p2 = decoy.intensity_probs[1], p3 = decoy.intensity_probs[2];
    if (!(u2 > u3)) throw std::domain_error("decoy_v1_upper: requires u2 > u3");
    // Upper bound: m2 up, m3 down.
    double m2p = counts[1] + delta;
    double m3m = std::max(counts[2] - delta, 0.0);
    double t1 = tau(1, decoy);
    double val = t1 / (u2 - u3) * (std::exp(u2) * m2p / p2 - std::exp(u3) * m3m / p3);
    return std::max(val, 0.0);
}

double s0_lower(const CountStatistics& stats, const DecoySettings& decoy, double eps_pe,
                int* failure_budget) {
    double sample = static_cast<double>(stats.L) + static_cast<double>(stats.k);
    double delta = hoeffding_delta(sample, eps_pe);
    if (failure_budget) *failure_budget += 2;
    return decoy_s0_lower(stats.n_x, decoy, delta);
}

double s1_lower(const CountStatistics& stats, const DecoySettings& decoy, double s_x0,
                double eps_pe, int* failure_budget) {
    double sample = static_cast<double>(stats.L) + static_cast<double>(stats.k);
    double delta = hoeffding_delta(sample, eps_pe);
    if (failure_budget) *failure_budget += 3;
    return decoy_s1_lower(stats.n_x, decoy, s_x0, delta);
}

double v1_upper(const CountStatistics& stats, const DecoySettings& decoy, double eps_pe,
                int* failure_budget) {
    double m_total = stats.m_z[0] + stats.m_z[1] + stats.m_z[2];
    double delta = hoeffding_delta(std::max(m_total, 1.0), eps_pe);
    if (failure_budget) *failure_budget += 2;
    return decoy_v1_upper(stats.m_z, decoy, delta);
}

double phase_error_upper(double s_z1_lower, double s_x1_lower, double v_z1, double alpha1,
                         GammaOptions options) {
    if (!(s_z1_lower > 0.0)) {
        throw EstimationError(
            "phase_error_upper: single-photon Z count lower bound is zero; the "
            "error ratio is undefined (insufficient Z-basis statistics)");
    }
    if (!(s_x1_lower > 0.0)) {
        throw EstimationError("phase_error_upper: single-photon X count lower bound is zero");
    }
    double b = v_z1 / s_z1_lower;
    double correction;
    if (b <= 0.0) {
        // The two-sample correction tends to 0 as the ratio does.
        correction = 0.0;
    } else if (b >= 1.0) {
        b = 1.0;
        correction = 0.0;  // ratio already saturates the [0, 1/2] clamp below
    } else {
        correction = gamma_correction(alpha1, b, s_z1_lower, s_x1_lower, options);
    }
    return std::clamp(b + correction, 0.0, 0.5);
}

double error_rate_upper(double observed_ex, double n, double k, double eps_pe,
                        int* failure_budget) {
    if (failure_budget) *failure_budget += 1;
    return std::min(observed_ex + serfling_delta(n, k, eps_pe), 0.5);
}

FiniteSizeEstimates estimate(const CountStatistics& stats, const DecoySettings& decoy,
                             double eps_pe, double alpha1, const EstimatorOptions& options) {
    stats.validate();
    decoy.validate();
    if (!(alpha1 > 0.0) || !(alpha1 < 1.0)) {
        throw std::domain_error("estimate: alpha1 must lie in (0,1)");
    }
    FiniteSizeEstimates est;
    est.tau0 = tau(0, decoy);
    est.tau1 = tau(1, decoy);

    const double sample_lk = static_cast<double>(stats.L) + static_cast<double>(stats.k);
    const double n = static_cast<double>(stats.n);

    est.e_x_upper = error_rate_upper(stats.observed_ex, n, static_cast<double>(stats.k),
                                     eps_pe, &est.failure_budget);

    // X side: bounds hold on the full observed sample, then scale to the
    // kept half by its share of the sample.
    est.delta_x = hoeffding_delta(sample_lk, eps_pe);
    est.s_x0_sample = decoy_s0_lower(stats.n_x, decoy, est.delta_x);
    est.failure_budget += 2;
    est.s_x1_sample = decoy_s1_lower(stats.n_x, decoy, est.s_x0_sample, est.delta_x);
    est.failure_budget += 3;
    double keep_frac = n / sample_lk;
    est.s_x0_lower = est.s_x0_sample * keep_frac;
    est.s_x1_lower = est.s_x1_sample * keep_frac;
    if (est.s_x0_sample == 0.0) est.warnings.push_back("vacuum-event lower bound clamped to 0");
    if (est.s_x1_sample == 0.0)
        est.warnings.push_back("single-photon-event lower bound clamped to 0");

    // Z side. The width's sample size is a modelling choice (see
    // ZDeltaSample); record it so reports can flag the assumption.
    double nz_total = stats.n_z[0] + stats.n_z[1] + stats.n_z[2];
    est.delta_z_counts = options.z_delta_sample == ZDeltaSample::l_half
                             ? hoeffding_delta(std::max(n, 1.0), eps_pe)
                             : hoeffding_delta(std::max(nz_total, 1.0), eps_pe);
    est.s_z0_lower = decoy_s0_lower(stats.n_z, decoy, est.delta_z_counts);
    est.s_z1_lower = decoy_s1_lower(stats.n_z, decoy, est.s_z0_lower, est.delta_z_counts);

    double m_total = stats.m_z[0] + stats.m_z[1] + stats.m_z[2];
    est.delta_z_errors = hoeffding_delta(std::max(m_total, 1.0), eps_pe);
    est.v_z1_upper = decoy_v1_upper(stats.m_z, decoy, est.delta_z_errors);
    est.failure_budget += 2;

    if (est.s_z1_lower <= 0.0) {
        est.phi_x1_upper = 0.5;
        est.warnings.push_back(
            "single-photon Z count lower bound is zero; phase error rate clamped to 1/2");
    } else {
        est.phi_x1_upper = phase_error_upper(est.s_z1_lower, est.s_x1_sample, est.v_z1_upper,
                                             alpha1, options.gamma);
        if (est.phi_x1_upper >= 0.5) {
            est.warnings.push_back("phase error rate clamped to 1/2");
        }
        if (est.v_z1_upper == 0.0) {
            est.warnings.push_back(
                "zero error-count upper bound; phase-error correction term vanishes");
        }
    }
    return est;
}

}  // namespace qds
