#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qds/channel_model.hpp"
#include "qds/finite_size.hpp"

// Turns finite-size estimates into the protocol's security quantities:
// extractable min-entropy, the minimum forger error rate p_E, authentication
// and verification thresholds, the forging / repudiation / honest-abort
// bounds, the QKD key-length comparison, and the minimal-signature-length
// search. Also hosts the brute-force guessing oracle used to validate the
// forging bound on small instances.

namespace qds {

// Raised when the protocol parameters cannot give a feasible signature
// scheme (distinct from configuration errors and numeric failures so the
// CLI can map it to its own exit code).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SecurityParams {
    double eps_pe = 1e-5;      // failure weight per one-sided count bound
    double eps_smooth = 1e-10; // smoothing of the min-entropy
    double markov_a = 1e-5;    // Markov-inequality split in the forging bound
    // Failure weight of the two-sample phase-error correction. The source
    // constraint is alpha1 > 0 with eps_smooth > 2*alpha1 plus two further
    // positive weights that enter only a term the headline numbers neglect;
    // the default takes the supremum eps_smooth/2 of the allowed range.
    double alpha1 = 5e-11;
    double target_level = 1e-4;  // bound all three failure probabilities here

    void validate() const;  // throws std::domain_error
};

struct AdversaryStrategy {
    enum class Kind { repudiating_alice, guessing_forger };
    Kind kind = Kind::repudiating_alice;
    double e_b = 0.0;                // declaration mismatch rate vs Bob's string
    double e_c = 0.0;                // vs Charlie's string
    double forger_error_rate = 0.0;  // i.i.d. guessing error rate of a forger
};

struct SecurityReport {
    double h_min = 0.0;      // extractable min-entropy in bits (kept half)
    double p_e = 0.0;        // minimum forger error rate
    double e_x_upper = 0.0;  // bound on the honest kept-half error rate
    double s_a = 0.0;        // authentication threshold
    double s_v = 0.0;        // verification threshold
    bool feasible = false;
    // Uncapped base-2 logs; linearize with linear_capped() for display.
    double p_abort_log2 = 0.0;
    double p_forge_log2 = 0.0;
    double p_repud_log2 = 0.0;
    double qkd_key_length = 0.0;  // extractable QKD key from the same sample
    std::uint64_t L = 0;
    std::uint64_t k = 0;
    double n_pulses = 0.0;
    double raw_x_expected = 0.0;  // expected sifted X sample (L + k source)
    FiniteSizeEstimates estimates;
    std::vector<std::string> warnings;
};

struct AnalysisOptions {
    SiftingConvention sifting = SiftingConvention::single_px;
    EstimatorOptions estimator;
    double f_ec = 1.2;          // error-correction inefficiency, in [1, 2]
    double k_fraction = 0.05;   // test-sample size as a fraction of L
    double min_entropy_offset_bits = 0.0;  // optional pessimism for the
                                           // neglected additive entropy term
};

// H_min >= s_x0 + s_x1 (1 - h(phi_u)), the source's own approximate form.
double min_entropy(double s_x0, double s_x1, double phi_u);

// Solve c0 + c1(1 - h(phi_u)) = h(p_e) for p_e in [0, 1/2]. A budget above
// 1 caps at p_e = 1/2 with a warning (perfect forging resistance).
double solve_pe(double c0, double c1, double phi_u,
                std::vector<std::string>* warnings = nullptr);

// Strict feasibility: c0 + c1(1 - h(phi_u)) - h(e_x_upper) > 0.
bool feasible(double c0, double c1, double phi_u, double e_x_upper);

// Thirds partition of the gap: s_a = e + (p_e - e)/3, s_v = e + 2(p_e - e)/3.
// Throws InfeasibleError when e_x_upper >= p_e.
std::pair<double, double> choose_thresholds(double e_x_upper, double p_e);

// log2(2 eps_pe): both receivers' test estimates must stay inside their
// Hoeffding intervals for an honest run to proceed.
double honest_abort_bound(double eps_pe);

// log2 of  a + (1/a)(2^{log2_binom_tail(L/2, r) - h_min} + eps) + 8 eps_pe
// with r = floor(s_v L / 2): the probability that a forger's declaration
// passes verification.
double forging_bound(double h_min, std::uint64_t L, double s_v, const SecurityParams& params);

// Explicit joint distribution over (x, f): prob[f][x] with x ranging over
// n_bits-bit strings. Used to brute-force the optimal guessing probability.
struct GuessingDistribution {
    unsigned n_bits = 0;
    std::vector<std::vector<double>> prob;  // prob[f][x], sums to 1

    void validate() const;  // normalization, sizes, n_bits <= 12
};

struct GuessingOracleResult {
    double avg_success = 0.0;      // optimal P(guess within Hamming distance r)
    double h_min_classical = 0.0;  // -log2 sum_f max_x P(x, f)
};

// Exact optimal average success of guessing x within Hamming distance r
// given the label f, plus the exact classical min-entropy of x given f.
GuessingOracleResult guessing_oracle(const GuessingDistribution& joint, unsigned r);

// log2 of 2 exp(-(1/4)(s_v - s_a)^2 L).
double repudiation_bound(double s_a, double s_v, std::uint64_t L);

// log2 of the per-strategy repudiation bound for given declaration mismatch
// rates: with both rates above s_a, 2 exp(-(min(e_b,e_c) - s_a)^2 L); with
// exactly one above, exp(-(e - s_a)^2 L); with both at or below s_a,
// 2 exp(-(s_v - s_a)^2 L). At e_b = e_c = (s_a + s_v)/2 this reproduces the
// optimal-strategy bound exactly.
double repudiation_strategy_bounds(const AdversaryStrategy& strategy, double s_a, double s_v,
                                   std::uint64_t L);

// n (c0 + c1(1 - h(phi_u)) - f_ec h(e_x_upper)): the key the same sample
// would yield under full QKD post-processing.
double qkd_key_length(double n, double c0, double c1, double phi_u, double e_x_upper,
                      double f_ec);

// Full analysis for a fixed number of transmitted pulses: expected
// statistics, sample split (L rounded down to even with k = k_fraction * L),
// finite-size estimates, and all security bounds.
SecurityReport analyze_pulses(double n_pulses, const ChannelParams& channel,
                              const DecoySettings& decoy, const SecurityParams& params,
                              const AnalysisOptions& options = {});

struct SignatureLengthResult {
    std::uint64_t L = 0;
    std::uint64_t n_pulses = 0;
    SecurityReport report;
};

// Smallest n_pulses (geometric climb, then integer bisection) whose abort,
// forging, and repudiation bounds all come in at or below
// params.target_level (with 1e-9 relative slack for bounds that sit exactly
// on the target). Throws InfeasibleError when even the near-asymptotic
// limit fails the feasibility condition.
SignatureLengthResult required_signature_length(const ChannelParams& channel,
                                                const DecoySettings& decoy,
                                                const SecurityParams& params,
                                                const AnalysisOptions& options = {});

}  // namespace qds
