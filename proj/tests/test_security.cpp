#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qds/math_kernel.hpp"
#include "qds/security.hpp"

using namespace qds;

namespace {

// Estimates of the 50 km / 6.3e8-pulse reference point, kept-half scale
// (n = 385696), frozen from the finite-size chain.
constexpr double kN = 385696.0;
constexpr double kS0 = 7411.07591041477;
constexpr double kS1 = 246168.139067408;
constexpr double kPhi = 0.0982648256835433;
constexpr double kExUpper = 0.0402606889490455;
constexpr double kHmin = 139487.430195953;
constexpr double kPe = 0.0688590157777966;
constexpr double kSa = 0.0497934645586292;
constexpr double kSv = 0.0593262401682129;
constexpr std::uint64_t kL = 771392;

SecurityParams paper_params() {
    return SecurityParams{};  // defaults are the reference working point
}

}  // namespace

TEST_CASE("min_entropy limiting cases and reference value") {
    CHECK(min_entropy(100.0, 200.0, 0.5) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(min_entropy(100.0, 200.0, 0.0) == doctest::Approx(300.0).epsilon(1e-12));
    CHECK(min_entropy(kS0, kS1, kPhi) == doctest::Approx(kHmin).epsilon(1e-9));
    CHECK_THROWS_AS(min_entropy(-1.0, 0.0, 0.1), std::domain_error);
    CHECK_THROWS_AS(min_entropy(0.0, 0.0, 0.6), std::domain_error);
}

TEST_CASE("solve_pe endpoints, reference value, capping") {
    CHECK(solve_pe(1.0, 0.0, 0.3) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(solve_pe(0.0, 0.0, 0.3) == 0.0);
    CHECK(solve_pe(kS0 / kN, kS1 / kN, kPhi) == doctest::Approx(kPe).epsilon(1e-9));
    std::vector<std::string> warnings;
    CHECK(solve_pe(0.8, 0.5, 0.0, &warnings) == 0.5);
    CHECK(warnings.size() == 1);
}

TEST_CASE("feasibility is equivalent to p_e exceeding the error bound") {
    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> half(0.0, 0.5);
    for (int i = 0; i < 1000; ++i) {
        double c0 = half(rng) * 0.5;
        double c1 = half(rng);
        double phi = half(rng);
        double e_x = half(rng);
        bool direct = feasible(c0, c1, phi, e_x);
        bool via_pe = solve_pe(c0, c1, phi) > e_x;
        CHECK(direct == via_pe);
    }
    CHECK(feasible(kS0 / kN, kS1 / kN, kPhi, kExUpper));
    CHECK_FALSE(feasible(kS0 / kN, kS1 / kN, kPhi, 0.069));
}

TEST_CASE("choose_thresholds partitions the gap into thirds") {
    auto [sa, sv] = choose_thresholds(0.0, 0.3);
    CHECK(sa == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(sv == doctest::Approx(0.2).epsilon(1e-12));

    auto [psa, psv] = choose_thresholds(kExUpper, kPe);
    CHECK(psa == doctest::Approx(kSa).epsilon(1e-9));
    CHECK(psv == doctest::Approx(kSv).epsilon(1e-9));
    CHECK(psa == doctest::Approx(0.0499).epsilon(0.011));
    CHECK(psv == doctest::Approx(0.0596).epsilon(0.011));

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        double e = 0.4 * uni(rng);
        double p = e + 1e-6 + 0.5 * uni(rng) * (0.5 - e);
        auto [a, v] = choose_thresholds(e, p);
        double third = (p - e) / 3.0;
        CHECK(a - e == doctest::Approx(third).epsilon(1e-10));
        CHECK(v - a == doctest::Approx(third).epsilon(1e-10));
        CHECK(p - v == doctest::Approx(third).epsilon(1e-10));
        CHECK(e < a);
        CHECK(a < v);
        CHECK(v < p);
    }
    CHECK_THROWS_AS(choose_thresholds(0.3, 0.3), InfeasibleError);
    CHECK_THROWS_AS(choose_thresholds(0.4, 0.3), InfeasibleError);
}

TEST_CASE("honest_abort_bound doubles the estimation failure weight") {
    CHECK(linear_capped(honest_abort_bound(1e-5)) == doctest::Approx(2e-5).epsilon(1e-12));
    CHECK(linear_capped(honest_abort_bound(1e-3)) == doctest::Approx(2e-3).epsilon(1e-12));
    CHECK(linear_capped(honest_abort_bound(0.5)) == 1.0);
}

TEST_CASE("forging_bound hand case with all side terms switched off") {
    SecurityParams p;
    p.eps_pe = 0.0;
    p.eps_smooth = 0.0;
    p.markov_a = 0.1;
    // L=20, s_v=0.2, h_min=15: r = floor(0.2*10) = 2, tail sum 1+10+45 = 56,
    // bound = 0.1 + 10 * 56/2^15 = 0.11708984375 exactly.
    double bound = forging_bound(15.0, 20, 0.2, p);
    CHECK(linear_capped(bound) == doctest::Approx(0.11708984375).epsilon(1e-12));
}

TEST_CASE("forging_bound reference value and vacuous regime") {
    double bound = forging_bound(kHmin, kL, kSv, paper_params());
    CHECK(linear_capped(bound) == doctest::Approx(1e-4).epsilon(1e-6));
    // Without entropy the Markov split's 1/a term saturates the cap.
    CHECK(linear_capped(forging_bound(0.0, kL, kSv, paper_params())) == 1.0);
    // Monotone: more entropy, lower bound (down to the constant floor).
    SecurityParams small = paper_params();
    small.markov_a = 1e-30;
    small.eps_smooth = 1e-30;
    small.alpha1 = 1e-31;
    small.eps_pe = 1e-30;
    double prev = forging_bound(1000.0, 2000, 0.1, small);
    for (double h = 1100.0; h <= 2000.0; h += 100.0) {
        double next = forging_bound(h, 2000, 0.1, small);
        CHECK(next <= prev + 1e-12);
        prev = next;
    }
    CHECK_THROWS_AS(forging_bound(100.0, 21, 0.2, paper_params()), std::domain_error);
    CHECK_THROWS_AS(forging_bound(100.0, 20, 0.6, paper_params()), std::domain_error);
}

TEST_CASE("forging tail: exact path never exceeds the entropy form") {
    for (std::uint64_t L : {100, 1000, 10000}) {
        std::uint64_t n = L / 2;
        for (double frac : {0.05, 0.1, 0.25, 0.45}) {
            auto r = static_cast<std::uint64_t>(frac * static_cast<double>(n));
            if (r < 1) continue;
            auto tail = log2_binom_tail(n, r);
            REQUIRE(tail.exact);
            double approx = static_cast<double>(n) *
                            binary_entropy(static_cast<double>(r) / static_cast<double>(n));
            CHECK(tail.log2_value <= approx + 1e-9);
        }
    }
}

TEST_CASE("guessing_oracle on uniform strings") {
    GuessingDistribution joint;
    joint.n_bits = 3;
    joint.prob = {std::vector<double>(8, 1.0 / 8.0)};
    auto r0 = guessing_oracle(joint, 0);
    CHECK(r0.avg_success == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
    CHECK(r0.h_min_classical == doctest::Approx(3.0).epsilon(1e-12));
    // Radius 1 covers the string and its three single-bit flips.
    auto r1 = guessing_oracle(joint, 1);
    CHECK(r1.avg_success == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("guessing_oracle validation") {
    GuessingDistribution joint;
    joint.n_bits = 13;
    joint.prob = {std::vector<double>(1 << 13, 1.0 / (1 << 13))};
    CHECK_THROWS_AS(joint.validate(), std::domain_error);

    joint.n_bits = 2;
    joint.prob = {{0.5, 0.5, 0.5, 0.5}};  // not normalized
    CHECK_THROWS_AS(joint.validate(), std::domain_error);

    joint.prob = {{0.5, 0.25, 0.125}};  // wrong row size
    CHECK_THROWS_AS(joint.validate(), std::domain_error);
}

TEST_CASE("guessing probability never beats the tail-entropy bound") {
    std::mt19937 rng(424243);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const unsigned n_bits = 4;
    const unsigned n_strings = 1 << n_bits;
    for (int trial = 0; trial < 100; ++trial) {
        GuessingDistribution joint;
        joint.n_bits = n_bits;
        unsigned n_labels = 1 + static_cast<unsigned>(uni(rng) * 4.0);
        joint.prob.assign(n_labels, std::vector<double>(n_strings, 0.0));
        double total = 0.0;
        for (auto& row : joint.prob) {
            for (auto& p : row) {
                p = uni(rng);
                total += p;
            }
        }
        for (auto& row : joint.prob) {
            for (auto& p : row) p /= total;
        }
        for (unsigned r = 0; r <= n_bits; ++r) {
            auto result = guessing_oracle(joint, r);
            double tail = log2_binom_tail(n_bits, r).log2_value;
            double bound = std::exp2(tail - result.h_min_classical);
            CHECK(result.avg_success <= bound + 1e-12);
        }
    }
}

TEST_CASE("repudiation_bound reference values and caps") {
    CHECK(linear_capped(repudiation_bound(0.05, 0.10, 2000)) ==
          doctest::Approx(2.0 * std::exp(-1.25)).epsilon(1e-12));
    double paper = repudiation_bound(kSa, kSv, kL);
    CHECK(linear_capped(paper) == doctest::Approx(4.89882438538739e-08).epsilon(1e-9));
    // Within a factor 2 of the source working point (threshold rounding).
    CHECK(std::fabs(paper - std::log2(2.97e-8)) <= 1.0);
    // Vanishing gap: the bound degenerates to 2.
    CHECK(linear_capped(repudiation_bound(0.05, 0.05 + 1e-15, 1000)) == 1.0);
    // Monotone in L and in the gap.
    CHECK(repudiation_bound(0.05, 0.10, 4000) < repudiation_bound(0.05, 0.10, 2000));
    CHECK(repudiation_bound(0.05, 0.12, 2000) < repudiation_bound(0.05, 0.10, 2000));
    CHECK_THROWS_AS(repudiation_bound(0.10, 0.05, 2000), std::domain_error);
}

TEST_CASE("repudiation_strategy_bounds branches") {
    AdversaryStrategy s;
    // Exactly one rate above s_a: one-sided tail without the union factor.
    s.e_b = 0.0;
    s.e_c = 0.2;
    CHECK(linear_capped(repudiation_strategy_bounds(s, 0.1, 0.3, 100)) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    // Both above: union over the two halves, smaller excess governs.
    s.e_b = 0.25;
    s.e_c = 0.2;
    CHECK(linear_capped(repudiation_strategy_bounds(s, 0.1, 0.3, 100)) ==
          doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
    // Both at or below s_a: acceptance is cheap, rejection must fail instead.
    s.e_b = 0.05;
    s.e_c = 0.0;
    CHECK(linear_capped(repudiation_strategy_bounds(s, 0.1, 0.3, 100)) ==
          doctest::Approx(2.0 * std::exp(-4.0)).epsilon(1e-12));
    // The midpoint strategy reproduces the optimal-strategy bound exactly.
    s.e_b = s.e_c = (0.05 + 0.10) / 2.0;
    CHECK(repudiation_strategy_bounds(s, 0.05, 0.10, 2000) ==
          doctest::Approx(repudiation_bound(0.05, 0.10, 2000)).epsilon(1e-12));
    s.e_c = 1.5;
    CHECK_THROWS_AS(repudiation_strategy_bounds(s, 0.05, 0.10, 2000), std::domain_error);
}

TEST_CASE("qkd_key_length reference values and signs") {
    double c0 = kS0 / kN;
    double c1 = kS1 / kN;
    CHECK(qkd_key_length(kN, c0, c1, kPhi, kExUpper, 1.2) ==
          doctest::Approx(26793.4627021707).epsilon(1e-9));
    CHECK(qkd_key_length(kN, c0, c1, kPhi, kExUpper, 1.0) ==
          doctest::Approx(45575.790617801).epsilon(1e-9));
    // No errors to correct: the full entropy budget survives.
    CHECK(qkd_key_length(1000.0, 0.1, 0.5, 0.1, 0.0, 1.2) ==
          doctest::Approx(1000.0 * (0.1 + 0.5 * (1.0 - binary_entropy(0.1)))).epsilon(1e-12));
    // Heavy error correction drives the key negative.
    CHECK(qkd_key_length(1000.0, 0.0, 0.3, 0.4, 0.4, 2.0) < 0.0);
    // Monotone decreasing in f_ec.
    CHECK(qkd_key_length(kN, c0, c1, kPhi, kExUpper, 1.5) <
          qkd_key_length(kN, c0, c1, kPhi, kExUpper, 1.2));
}

TEST_CASE("analyze_pulses reproduces the reference working point") {
    auto report = analyze_pulses(6.3e8, ChannelParams{}, DecoySettings{}, paper_params());
    CHECK(report.feasible);
    CHECK(report.L == kL);
    CHECK(report.k == 38569);
    CHECK(report.raw_x_expected == doctest::Approx(809963.17019222).epsilon(1e-9));
    CHECK(report.e_x_upper == doctest::Approx(kExUpper).epsilon(1e-9));
    CHECK(report.h_min == doctest::Approx(kHmin).epsilon(1e-4));
    CHECK(report.p_e == doctest::Approx(kPe).epsilon(1e-4));
    CHECK(report.s_a == doctest::Approx(kSa).epsilon(1e-4));
    CHECK(report.s_v == doctest::Approx(kSv).epsilon(1e-4));
    CHECK(linear_capped(report.p_abort_log2) == doctest::Approx(2e-5).epsilon(1e-12));
    CHECK(linear_capped(report.p_forge_log2) == doctest::Approx(1e-4).epsilon(1e-3));
    CHECK(linear_capped(report.p_repud_log2) ==
          doctest::Approx(4.89882438538739e-08).epsilon(1e-2));
    CHECK(report.qkd_key_length == doctest::Approx(26793.4627021707).epsilon(1e-3));
    CHECK(report.estimates.failure_budget == 8);
    CHECK(report.warnings.empty());
    // Threshold chain.
    CHECK(report.e_x_upper < report.s_a);
    CHECK(report.s_a < report.s_v);
    CHECK(report.s_v < report.p_e);
}

TEST_CASE("analyze_pulses flags infeasible noise levels without throwing") {
    ChannelParams noisy;
    noisy.optical_error_x = 0.25;
    auto report = analyze_pulses(6.3e8, noisy, DecoySettings{}, paper_params());
    CHECK_FALSE(report.feasible);
    CHECK(report.s_a == 0.0);
    CHECK(report.s_v == 0.0);
    bool flagged = false;
    for (const auto& w : report.warnings) {
        if (w.find("infeasible") != std::string::npos) flagged = true;
    }
    CHECK(flagged);
}

TEST_CASE("analyze_pulses rejects a sample too small to split") {
    CHECK_THROWS_AS(analyze_pulses(1.0, ChannelParams{}, DecoySettings{}, paper_params()),
                    InfeasibleError);
}

TEST_CASE("analyze_pulses validates analysis options") {
    AnalysisOptions bad;
    bad.f_ec = 0.9;
    CHECK_THROWS_AS(analyze_pulses(1e8, ChannelParams{}, DecoySettings{}, paper_params(), bad),
                    std::domain_error);
    bad = AnalysisOptions{};
    bad.k_fraction = 0.0;
    CHECK_THROWS_AS(analyze_pulses(1e8, ChannelParams{}, DecoySettings{}, paper_params(), bad),
                    std::domain_error);
}

TEST_CASE("QKD feasibility implies QDS feasibility across a noise grid") {
    bool saw_gap_point = false;
    for (double qx = 0.005; qx <= 0.0505; qx += 0.0025) {
        ChannelParams channel;
        channel.optical_error_x = qx;
        auto report = analyze_pulses(6.3e8, channel, DecoySettings{}, paper_params());
        if (report.qkd_key_length > 0.0) CHECK(report.feasible);
        if (report.feasible && report.qkd_key_length <= 0.0) saw_gap_point = true;
    }
    // The band where signatures work but QKD does not is non-empty.
    CHECK(saw_gap_point);
}

TEST_CASE("required_signature_length meets a loose target quickly") {
    SecurityParams params = paper_params();
    params.target_level = 1.0;  // trivially satisfied at the first feasible point
    ChannelParams channel;
    auto result = required_signature_length(channel, DecoySettings{}, params);
    CHECK(result.report.feasible);
    CHECK(result.L >= 2);
    CHECK(linear_capped(result.report.p_forge_log2) <= 1.0);

    // A tighter target needs more pulses.
    params.target_level = 1e-3;
    auto tight = required_signature_length(channel, DecoySettings{}, params);
    CHECK(tight.n_pulses > result.n_pulses);

    // A lossless link reaches the same target with a shorter signature.
    ChannelParams nearby = channel;
    nearby.distance_km = 0.0;
    auto close = required_signature_length(nearby, DecoySettings{}, params);
    CHECK(close.L < tight.L);
    CHECK(close.n_pulses < tight.n_pulses);
}

TEST_CASE("security parameter validation") {
    SecurityParams p = paper_params();
    CHECK_NOTHROW(p.validate());
    p.alpha1 = p.eps_smooth;  // violates 2*alpha1 <= eps_smooth
    CHECK_THROWS_AS(p.validate(), std::domain_error);
    p = paper_params();
    p.eps_pe = 0.0;
    CHECK_THROWS_AS(p.validate(), std::domain_error);
    p = paper_params();
    p.target_level = 1.0;
    CHECK_NOTHROW(p.validate());
    p.target_level = 1.1;
    CHECK_THROWS_AS(p.validate(), std::domain_error);
}
