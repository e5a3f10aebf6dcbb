#include "doctest.h"

#include <array>
#include <cmath>
#include <stdexcept>

#include "qds/channel_model.hpp"
#include "qds/finite_size.hpp"
#include "qds/math_kernel.hpp"

using namespace qds;

namespace {

// Expected counts at the 50 km reference point with 6.3e8 pulses, split as
// L = 771392, k = 38569 (kept half n = 385696).
CountStatistics golden_counts() {
    CountStatistics stats;
    stats.n_x = {676495.0941, 119917.2295, 13550.84656};
    stats.n_z = {45099.67294, 7994.481969, 903.3897707};
    stats.m_z = {545.4099534, 386.3290047, 291.8663245};
    stats.observed_ex = 0.0286707562287618;
    stats.L = 771392;
    stats.k = 38569;
    stats.n = 385696;
    return stats;
}

}  // namespace

TEST_CASE("tau reproduces Poisson photon-number fractions") {
    // Degenerate single-intensity source: tau_0 = e^{-u}.
    DecoySettings single;
    single.intensities = {0.2, 0.1, 0.05};
    single.intensity_probs = {1.0, 0.0, 0.0};
    CHECK(tau(0, single) == doctest::Approx(std::exp(-0.2)).epsilon(1e-12));
    CHECK(tau(1, single) == doctest::Approx(0.2 * std::exp(-0.2)).epsilon(1e-12));

    DecoySettings decoy;  // reference three-intensity source
    CHECK(tau(0, decoy) == doctest::Approx(0.895646314298057).epsilon(1e-12));
    CHECK(tau(1, decoy) == doctest::Approx(0.0868906739732634).epsilon(1e-12));
    double total = 0.0;
    for (unsigned n = 0; n <= 50; ++n) total += tau(n, decoy);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bound_observed_counts widths and clamping") {
    auto zero = bound_observed_counts(0.0, 8.1e5, 1e-5);
    CHECK(zero.lower == 0.0);
    CHECK(zero.upper == doctest::Approx(2159.33666048464).epsilon(1e-12));

    auto mid = bound_observed_counts(1e5, 8.1e5, 1e-5);
    CHECK(mid.lower == doctest::Approx(1e5 - 2159.33666048464).epsilon(1e-12));
    CHECK(mid.upper == doctest::Approx(1e5 + 2159.33666048464).epsilon(1e-12));

    // eps -> 1 collapses the interval onto the observation.
    auto tight = bound_observed_counts(1e5, 8.1e5, 1.0 - 1e-12);
    CHECK(tight.upper - tight.lower < 1e-2);

    // Lower bound clamps at zero when the width exceeds the observation.
    auto clamped = bound_observed_counts(100.0, 8.1e5, 1e-5);
    CHECK(clamped.lower == 0.0);

    CHECK_THROWS_AS(bound_observed_counts(-1.0, 10.0, 1e-5), std::domain_error);
    CHECK_THROWS_AS(bound_observed_counts(11.0, 10.0, 1e-5), std::domain_error);
}

TEST_CASE("decoy bounds with zero width match hand-evaluated values") {
    DecoySettings decoy;
    // Counts per intensity [u1, u2, u3]; the vacuum bound ignores index 0.
    std::array<double, 3> counts{5000.0, 1000.0, 100.0};
    double s0 = decoy_s0_lower(counts, decoy, 0.0);
    CHECK(s0 == doctest::Approx(145.54609166113968).epsilon(1e-12));
    CHECK(decoy_s1_lower(counts, decoy, s0, 0.0) ==
          doctest::Approx(4730.881687381914).epsilon(1e-12));
    std::array<double, 3> errors{0.0, 100.0, 10.0};
    CHECK(decoy_v1_upper(errors, decoy, 0.0) ==
          doctest::Approx(489.113796954861).epsilon(1e-12));
}

TEST_CASE("decoy bounds clamp at zero when widths swamp the counts") {
    DecoySettings decoy;
    std::array<double, 3> tiny{10.0, 5.0, 1.0};
    CHECK(decoy_s0_lower(tiny, decoy, 1e4) == 0.0);
    CHECK(decoy_s1_lower(tiny, decoy, 0.0, 1e4) == 0.0);
}

TEST_CASE("raising an adversarially-bounded count never loosens a bound") {
    DecoySettings decoy;
    std::array<double, 3> counts{5000.0, 1000.0, 100.0};
    double delta = 25.0;
    double s0 = decoy_s0_lower(counts, decoy, delta);
    double s1 = decoy_s1_lower(counts, decoy, s0, delta);

    // n2 enters the vacuum bound with a negative coefficient.
    auto bumped = counts;
    bumped[1] += 200.0;
    CHECK(decoy_s0_lower(bumped, decoy, delta) <= s0);

    // n1 enters the single-photon bound with a negative coefficient.
    bumped = counts;
    bumped[0] += 200.0;
    CHECK(decoy_s1_lower(bumped, decoy, s0, delta) <= s1);

    // m3 enters the error-count upper bound with a negative coefficient, so
    // raising it must not raise the bound; raising m2 loosens it.
    std::array<double, 3> errors{0.0, 100.0, 10.0};
    double v1 = decoy_v1_upper(errors, decoy, delta);
    auto more3 = errors;
    more3[2] += 20.0;
    CHECK(decoy_v1_upper(more3, decoy, delta) <= v1);
    auto more2 = errors;
    more2[1] += 20.0;
    CHECK(decoy_v1_upper(more2, decoy, delta) >= v1);
}

TEST_CASE("phase_error_upper reference value and clamps") {
    CHECK(phase_error_upper(1e5, 1e5, 5000.0, 2.5e-11) ==
          doctest::Approx(0.05900950762579942).epsilon(1e-12));
    // Zero error bound: the correction vanishes with the ratio.
    CHECK(phase_error_upper(1e5, 1e5, 0.0, 2.5e-11) == 0.0);
    // Ratio at or above 1 saturates the phase-error clamp.
    CHECK(phase_error_upper(100.0, 100.0, 150.0, 2.5e-11) == 0.5);
    // b + gamma above 1/2 clamps to 1/2.
    CHECK(phase_error_upper(100.0, 100.0, 49.9, 1e-10) == 0.5);
    CHECK_THROWS_AS(phase_error_upper(0.0, 1e5, 10.0, 1e-10), EstimationError);
    CHECK_THROWS_AS(phase_error_upper(1e5, 0.0, 10.0, 1e-10), EstimationError);
}

TEST_CASE("error_rate_upper reference value and clamp") {
    int budget = 0;
    CHECK(error_rate_upper(0.0286707562287618, 385696, 38569, 1e-5, &budget) ==
          doctest::Approx(0.0402606889490455).epsilon(1e-12));
    CHECK(budget == 1);
    CHECK(error_rate_upper(0.0, 1e6, 1e5, 1.0 - 1e-12) < 1e-6);
    CHECK(error_rate_upper(0.49, 100, 10, 1e-5) == 0.5);
}

TEST_CASE("wrapper bounds reproduce the reference chain and charge the budget") {
    auto stats = golden_counts();
    DecoySettings decoy;
    int budget = 0;
    double s0 = s0_lower(stats, decoy, 1e-5, &budget);
    CHECK(s0 == doctest::Approx(15563.3059335352).epsilon(1e-9));
    CHECK(budget == 2);
    double s1 = s1_lower(stats, decoy, s0, 1e-5, &budget);
    CHECK(s1 == doctest::Approx(516954.169948123).epsilon(1e-9));
    CHECK(budget == 5);
    double v1 = v1_upper(stats, decoy, 1e-5, &budget);
    CHECK(v1 == doctest::Approx(1330.67861108909).epsilon(1e-9));
    CHECK(budget == 7);
    double ex = error_rate_upper(stats.observed_ex, static_cast<double>(stats.n),
                                 static_cast<double>(stats.k), 1e-5, &budget);
    CHECK(ex == doctest::Approx(0.0402606889490455).epsilon(1e-12));
    CHECK(budget == 8);
}

TEST_CASE("estimate reproduces the reference operating point") {
    auto stats = golden_counts();
    auto est = estimate(stats, DecoySettings{}, 1e-5, 5e-11);

    CHECK(est.tau0 == doctest::Approx(0.895646314298057).epsilon(1e-12));
    CHECK(est.tau1 == doctest::Approx(0.0868906739732634).epsilon(1e-12));
    CHECK(est.delta_x == doctest::Approx(2159.28467582817).epsilon(1e-12));
    CHECK(est.delta_z_counts == doctest::Approx(1490.04853950084).epsilon(1e-12));
    CHECK(est.delta_z_errors == doctest::Approx(83.9263856517056).epsilon(1e-12));
    CHECK(est.s_x0_sample == doctest::Approx(15563.3059335352).epsilon(1e-9));
    CHECK(est.s_x1_sample == doctest::Approx(516954.169948123).epsilon(1e-9));
    CHECK(est.s_x0_lower == doctest::Approx(7411.1035535548).epsilon(1e-9));
    CHECK(est.s_x1_lower == doctest::Approx(246168.834712179).epsilon(1e-9));
    CHECK(est.s_z0_lower == 0.0);
    CHECK(est.s_z1_lower == doctest::Approx(16859.9311261241).epsilon(1e-9));
    CHECK(est.v_z1_upper == doctest::Approx(1330.67861108909).epsilon(1e-9));
    CHECK(est.phi_x1_upper == doctest::Approx(0.0982648248101817).epsilon(1e-9));
    CHECK(est.e_x_upper == doctest::Approx(0.0402606889490455).epsilon(1e-12));
    CHECK(est.failure_budget == 8);
    CHECK(est.s_x0_lower + est.s_x1_lower <= static_cast<double>(stats.n));
    CHECK(est.phi_x1_upper >= 0.0);
    CHECK(est.phi_x1_upper <= 0.5);
    CHECK(est.e_x_upper >= stats.observed_ex);
}

TEST_CASE("estimate widens monotonically as eps_pe shrinks") {
    auto stats = golden_counts();
    DecoySettings decoy;
    auto loose = estimate(stats, decoy, 1e-3, 5e-11);
    auto tight = estimate(stats, decoy, 1e-7, 5e-11);
    CHECK(tight.s_x0_lower <= loose.s_x0_lower);
    CHECK(tight.s_x1_lower <= loose.s_x1_lower);
    CHECK(tight.s_z1_lower <= loose.s_z1_lower);
    CHECK(tight.v_z1_upper >= loose.v_z1_upper);
    CHECK(tight.phi_x1_upper >= loose.phi_x1_upper);
    CHECK(tight.e_x_upper >= loose.e_x_upper);
}

TEST_CASE("z-width sample-size conventions") {
    auto stats = golden_counts();
    DecoySettings decoy;
    EstimatorOptions alt;
    alt.z_delta_sample = ZDeltaSample::z_total;
    auto est_alt = estimate(stats, decoy, 1e-5, 5e-11, alt);
    double nz_total = stats.n_z[0] + stats.n_z[1] + stats.n_z[2];
    CHECK(est_alt.delta_z_counts ==
          doctest::Approx(hoeffding_delta(nz_total, 1e-5)).epsilon(1e-12));
    // The kept-half convention is the wider one at this operating point.
    auto est_default = estimate(stats, decoy, 1e-5, 5e-11);
    CHECK(est_default.delta_z_counts > est_alt.delta_z_counts);
    CHECK(est_alt.s_z1_lower > est_default.s_z1_lower);
}

TEST_CASE("degenerate Z statistics clamp the phase error and warn") {
    auto stats = golden_counts();
    stats.n_z = {1.0, 0.5, 0.1};
    stats.m_z = {0.0, 0.0, 0.0};
    auto est = estimate(stats, DecoySettings{}, 1e-5, 5e-11);
    CHECK(est.s_z1_lower == 0.0);
    CHECK(est.phi_x1_upper == 0.5);
    REQUIRE_FALSE(est.warnings.empty());
    bool flagged = false;
    for (const auto& w : est.warnings) {
        if (w.find("phase error rate clamped") != std::string::npos) flagged = true;
    }
    CHECK(flagged);
}

TEST_CASE("count statistics validation") {
    auto stats = golden_counts();
    CHECK_NOTHROW(stats.validate());

    auto bad = stats;
    bad.L = 771393;
    bad.n = bad.L / 2;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);

    bad = stats;
    bad.n = stats.n + 1;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);

    bad = stats;
    bad.n_x[0] += 100.0;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);

    bad = stats;
    bad.m_z[0] = bad.n_z[0] + 1.0;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);

    bad = stats;
    bad.observed_ex = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);
}

TEST_CASE("estimate rejects out-of-range smoothing weights") {
    auto stats = golden_counts();
    CHECK_THROWS_AS(estimate(stats, DecoySettings{}, 1e-5, 0.0), std::domain_error);
    CHECK_THROWS_AS(estimate(stats, DecoySettings{}, 1e-5, 1.0), std::domain_error);
}
