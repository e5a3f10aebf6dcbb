#include "qds/security.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qds {

namespace {
constexpr double kLn2 = 0.6931471805599453094172321;
// Relative slack when comparing a bound against the target level: the
// forging bound's constant part can equal the target exactly, with only a
// residual of order 2^-10000 on top.
constexpr double kTargetSlack = 1e-9;
}  // namespace

void SecurityParams::validate() const {
    auto fail = [](const std::string& what) { throw std::domain_error("security: " + what); };
    auto in01 = [](double v) { return v > 0.0 && v < 1.0; };
    if (!in01(eps_pe)) fail("eps_pe must lie in (0,1)");
    if (!in01(eps_smooth)) fail("eps_smooth must lie in (0,1)");
    if (!in01(markov_a)) fail("markov_a must lie in (0,1)");
    if (!in01(alpha1)) fail("alpha1 must lie in (0,1)");
    if (!(2.0 * alpha1 <= eps_smooth))
        fail("alpha1 must not exceed eps_smooth/2 (the remaining weights in the "
             "constraint enter only the neglected additive term)");
    // target 1 is allowed: it demands nothing beyond feasibility.
    if (!(target_level > 0.0) || !(target_level <= 1.0))
        fail("target_level must lie in (0,1]");
}

double min_entropy(double s_x0, double s_x1, double phi_u) {
    if (!(s_x0 >= 0.0) || !(s_x1 >= 0.0)) {
        throw std::domain_error("min_entropy: counts must be non-negative");
    }
    if (!(phi_u >= 0.0) || !(phi_u <= 0.5)) {
        throw std::domain_error("min_entropy: phase error rate must lie in [0, 1/2]");
    }
    return s_x0 + s_x1 * (1.0 - binary_entropy(phi_u));
}

double solve_pe(double c0, double c1, double phi_u, std::vector<std::string>* warnings) {
    if (!(c0 >= 0.0) || !(c1 >= 0.0)) {
        throw std::domain_error("solve_pe: rates must be non-negative");
    }
    double budget = c0 + c1 * (1.0 - binary_entropy(phi_u));
    if (budget > 1.0) {
        if (warnings) {
            warnings->push_back(
                "entropy budget exceeds 1 bit per element; forger error rate capped at 1/2");
        }
        return 0.5;
    }
    return inverse_binary_entropy(budget);
}

bool feasible(double c0, double c1, double phi_u, double e_x_upper) {
    double budget = c0 + c1 * (1.0 - binary_entropy(phi_u));
    return budget - binary_entropy(e_x_upper) > 0.0;
}

std::pair<double, double> choose_thresholds(double e_x_upper, double p_e) {
    if (!(e_x_upper < p_e)) {
        throw InfeasibleError(
            "choose_thresholds: error-rate bound " + std::to_string(e_x_upper) +
            " is not below the minimum forger error rate " + std::to_string(p_e));
    }
    double gap = p_e - e_x_upper;
    return {e_x_upper + gap / 3.0, e_x_upper + 2.0 * gap / 3.0};
}

double honest_abort_bound(double eps_pe) {
    if (!(eps_pe > 0.0) || !(eps_pe < 1.0)) {
        throw std::domain_error("honest_abort_bound: eps_pe must lie in (0,1)");
    }
    return std::log2(2.0 * eps_pe);
}

double forging_bound(double h_min, std::uint64_t L, double s_v, const SecurityParams& params) {
    if (L == 0 || L % 2 != 0) throw std::domain_error("forging_bound: L must be even and positive");
    if (!(s_v > 0.0) || !(s_v < 0.5)) {
        throw std::domain_error("forging_bound: s_v must lie in (0, 1/2)");
    }
    if (!(h_min >= 0.0)) throw std::domain_error("forging_bound: h_min must be non-negative");
    std::uint64_t n = L / 2;
    auto r = static_cast<std::uint64_t>(std::floor(s_v * static_cast<double>(n)));
    double tail = log2_binom_tail(n, r).log2_value;
    double log2_a = std::log2(params.markov_a);
    // a + (1/a) * 2^(tail - h_min) + (1/a) * eps + 8 eps_pe, in log2 space.
    double acc = log2_a;
    acc = log2_add(acc, tail - h_min - log2_a);
    if (params.eps_smooth > 0.0) {
        acc = log2_add(acc, std::log2(params.eps_smooth) - log2_a);
    }
    if (params.eps_pe > 0.0) {
        acc = log2_add(acc, std::log2(8.0 * params.eps_pe));
    }
    return acc;
}

void GuessingDistribution::validate() const {
    if (n_bits == 0 || n_bits > 12) {
        throw std::domain_error("guessing_oracle: n_bits must lie in [1, 12]");
    }
    if (prob.empty()) throw std::domain_error("guessing_oracle: empty distribution");
    const std::size_t width = std::size_t{1} << n_bits;
    double total = 0.0;
    for (const auto& row : prob) {
        if (row.size() != width) {
            throw std::domain_error("guessing_oracle: each row must have 2^n_bits entries");
        }
        for (double p : row) {
            if (!(p >= 0.0)) throw std::domain_error("guessing_oracle: negative probability");
            total += p;
        }
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::domain_error("guessing_oracle: distribution must sum to 1");
    }
}

GuessingOracleResult guessing_oracle(const GuessingDistribution& joint, unsigned r) {
    joint.validate();
    const unsigned n = joint.n_bits;
    const std::size_t width = std::size_t{1} << n;
    GuessingOracleResult out;
    double guess_mass = 0.0;  // sum_f max_x P(x, f)
    for (const auto& row : joint.prob) {
        double best_ball = 0.0, best_point = 0.0;
        for (std::size_t guess = 0; guess < width; ++guess) {
            double ball = 0.0;
            for (std::size_t x = 0; x < width; ++x) {
                if (std::popcount(guess ^ x) <= static_cast<int>(r)) ball += row[x];
            }
            best_ball = std::max(best_ball, ball);
            best_point = std::max(best_point, row[guess]);
        }
        out.avg_success += best_ball;
        guess_mass += best_point;
    }
    out.h_min_classical = -std::log2(guess_mass);
    return out;
}

double repudiation_bound(double s_a, double s_v, std::uint64_t L) {
    if (!(s_a < s_v)) throw std::domain_error("repudiation_bound: requires s_a < s_v");
    if (L < 1) throw std::domain_error("repudiation_bound: L must be >= 1");
    double gap = s_v - s_a;
    return 1.0 - 0.25 * gap * gap * static_cast<double>(L) / kLn2;
}

double repudiation_strategy_bounds(const AdversaryStrategy& strategy, double s_a, double s_v,
                                   std::uint64_t L) {
    if (!(s_a < s_v)) throw std::domain_error("repudiation_strategy_bounds: requires s_a < s_v");
    if (L < 1) throw std::domain_error("repudiation_strategy_bounds: L must be >= 1");
    auto rate_ok = [](double e) { return e >= 0.0 && e <= 1.0; };
    if (!rate_ok(strategy.e_b) || !rate_ok(strategy.e_c)) {
        throw std::domain_error("repudiation_strategy_bounds: mismatch rates must lie in [0,1]");
    }
    double e_b = strategy.e_b, e_c = strategy.e_c;
    double Ld = static_cast<double>(L);
    bool b_high = e_b > s_a, c_high = e_c > s_a;
    if (b_high && c_high) {
        // Both halves carry excess mismatches; a receiver accepting at level
        // s_a must beat the smaller excess on one of them.
        double gap = std::min(e_b, e_c) - s_a;
        return 1.0 - gap * gap * Ld / kLn2;
    }
    if (b_high || c_high) {
        double gap = (b_high ? e_b : e_c) - s_a;
        return -gap * gap * Ld / kLn2;
    }
    // Both rates at or below s_a: acceptance is likely, so the argument
    // shifts to the verifier's halves exceeding s_v (union over the two).
    double gap = s_v - s_a;
    return 1.0 - gap * gap * Ld / kLn2;
}

double qkd_key_length(double n, double c0, double c1, double phi_u, double e_x_upper,
                      double f_ec) {
    if (!(f_ec >= 1.0)) throw std::domain_error("qkd_key_length: f_ec must be >= 1");
    double budget = c0 + c1 * (1.0 - binary_entropy(phi_u));
    return n * (budget - f_ec * binary_entropy(e_x_upper));
}

namespace {

CountStatistics expected_counts(double n_pulses, const ChannelParams& channel,
                                const DecoySettings& decoy, const AnalysisOptions& options,
                                double* raw_out = nullptr) {
    ExpectedStatistics exp_stats = expected_statistics(n_pulses, channel, decoy, options.sifting);
    double raw = exp_stats.expected_x_raw;
    if (raw_out) *raw_out = raw;
    if (!(raw >= 4.0)) {
        throw InfeasibleError("analysis: expected sifted X sample too small to split (raw=" +
                              std::to_string(raw) + ")");
    }
    auto L = static_cast<std::uint64_t>(std::floor(raw / (1.0 + options.k_fraction) / 2.0)) * 2;
    auto k = static_cast<std::uint64_t>(std::floor(static_cast<double>(L) * options.k_fraction));
    CountStatistics stats;
    stats.L = L;
    stats.k = k;
    stats.n = L / 2;
    stats.n_x = exp_stats.x_sifted_counts;
    // The analysis conditions on having committed exactly L + k sifted X
    // events, so the per-intensity expectations are scaled to that total
    // (the unconditioned expectation exceeds it only by the split rounding).
    const double committed = static_cast<double>(L) + static_cast<double>(k);
    for (auto& c : stats.n_x) c *= committed / raw;
    stats.n_z = exp_stats.z_sifted_counts;
    for (int i = 0; i < 3; ++i) stats.m_z[i] = exp_stats.z_sifted_counts[i] * exp_stats.z_error_rate[i];
    stats.observed_ex = exp_stats.expected_observed_ex;
    return stats;
}

}  // namespace

SecurityReport analyze_pulses(double n_pulses, const ChannelParams& channel,
                              const DecoySettings& decoy, const SecurityParams& params,
                              const AnalysisOptions& options) {
    channel.validate();
    decoy.validate();
    params.validate();
    if (!(n_pulses >= 1.0)) throw std::domain_error("analysis: n_pulses must be >= 1");
    if (!(options.f_ec >= 1.0) || !(options.f_ec <= 2.0)) {
        throw std::domain_error("analysis: f_ec must lie in [1, 2]");
    }
    if (!(options.k_fraction > 0.0) || !(options.k_fraction < 1.0)) {
        throw std::domain_error("analysis: k_fraction must lie in (0,1)");
    }
    if (!(options.min_entropy_offset_bits >= 0.0)) {
        throw std::domain_error("analysis: min_entropy_offset_bits must be >= 0");
    }

    SecurityReport report;
    report.n_pulses = n_pulses;

    double raw_x = 0.0;
    CountStatistics stats = expected_counts(n_pulses, channel, decoy, options, &raw_x);
    report.L = stats.L;
    report.k = stats.k;
    report.raw_x_expected = raw_x;

    report.estimates = estimate(stats, decoy, params.eps_pe, params.alpha1, options.estimator);
    const FiniteSizeEstimates& est = report.estimates;
    report.warnings = est.warnings;
    if (options.estimator.z_delta_sample == ZDeltaSample::z_total) {
        report.warnings.push_back(
            "z-basis count bounds use the total observed Z sample as Hoeffding width");
    }
    report.e_x_upper = est.e_x_upper;

    double n = static_cast<double>(stats.n);
    double h_min_raw = min_entropy(est.s_x0_lower, est.s_x1_lower, est.phi_x1_upper);
    report.h_min = std::max(h_min_raw - options.min_entropy_offset_bits, 0.0);
    double c0 = est.s_x0_lower / n;
    double c1 = est.s_x1_lower / n;
    double budget = report.h_min / n;
    report.p_e = budget > 1.0 ? 0.5 : inverse_binary_entropy(budget);
    if (budget > 1.0) {
        report.warnings.push_back(
            "entropy budget exceeds 1 bit per element; forger error rate capped at 1/2");
    }
    report.qkd_key_length = qkd_key_length(n, c0, c1, est.phi_x1_upper, est.e_x_upper,
                                           options.f_ec) -
                            options.min_entropy_offset_bits;
    report.p_abort_log2 = honest_abort_bound(params.eps_pe);

    report.feasible = report.p_e > report.e_x_upper;
    if (!report.feasible) {
        report.warnings.push_back(
            "infeasible: the error-rate bound reaches the minimum forger error rate");
        report.s_a = report.s_v = 0.0;
        report.p_forge_log2 = report.p_repud_log2 = 0.0;  // vacuous bounds
        return report;
    }
    std::tie(report.s_a, report.s_v) = choose_thresholds(report.e_x_upper, report.p_e);
    report.p_forge_log2 = forging_bound(report.h_min, report.L, report.s_v, params);
    report.p_repud_log2 = repudiation_bound(report.s_a, report.s_v, report.L);
    return report;
}

namespace {

bool meets_target(const SecurityReport& report, double target) {
    if (!report.feasible) return false;
    double limit = target * (1.0 + kTargetSlack);
    return linear_capped(report.p_abort_log2) <= limit &&
           linear_capped(report.p_forge_log2) <= limit &&
           linear_capped(report.p_repud_log2) <= limit;
}

}  // namespace

SignatureLengthResult required_signature_length(const ChannelParams& channel,
                                                const DecoySettings& decoy,
                                                const SecurityParams& params,
                                                const AnalysisOptions& options) {
    params.validate();
    // Feasibility probe near the asymptotic limit: at 1e15 pulses the
    // relative finite-size widths are ~1e-6 of the counts.
    constexpr double kProbePulses = 1e15;
    SecurityReport probe = analyze_pulses(kProbePulses, channel, decoy, params, options);
    if (!meets_target(probe, params.target_level)) {
        std::string why = probe.feasible
                              ? "its residual bounds exceed the target level " +
                                    std::to_string(params.target_level)
                              : "the error-rate bound " + std::to_string(probe.e_x_upper) +
                                    " reaches the forger error rate " + std::to_string(probe.p_e);
        throw InfeasibleError(
            "required_signature_length: even near the asymptotic limit " + why);
    }

    // Grid points small enough that the sample cannot be split count as
    // plain failures rather than aborting the search.
    auto try_evaluate = [&](std::uint64_t pulses) -> std::pair<bool, SecurityReport> {
        try {
            SecurityReport r = analyze_pulses(static_cast<double>(pulses), channel, decoy,
                                              params, options);
            return {meets_target(r, params.target_level), std::move(r)};
        } catch (const InfeasibleError&) {
            return {false, SecurityReport{}};
        }
    };

    // Geometric climb from a small grid point to the first success.
    std::uint64_t hi = 1u << 20;
    auto [hi_ok, hi_report] = try_evaluate(hi);
    std::uint64_t lo = 0;
    while (!hi_ok) {
        lo = hi;
        if (hi > static_cast<std::uint64_t>(kProbePulses)) {
            throw InfeasibleError(
                "required_signature_length: no pulse count below 1e15 meets the target");
        }
        hi *= 2;
        std::tie(hi_ok, hi_report) = try_evaluate(hi);
    }
    // Integer bisection down to the smallest success.
    while (hi - lo > 1) {
        std::uint64_t mid = lo + (hi - lo) / 2;
        auto [mid_ok, mid_report] = try_evaluate(mid);
        if (mid_ok) {
            hi = mid;
            hi_report = std::move(mid_report);
        } else {
            lo = mid;
        }
    }
    SignatureLengthResult result;
    result.n_pulses = hi;
    result.L = hi_report.L;
    result.report = std::move(hi_report);
    return result;
}

}  // namespace qds
