#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qds/channel_model.hpp"
#include "qds/finite_size.hpp"
#include "qds/security.hpp"

// Executable model of the three-party protocol: stochastic key generation
// against the channel model (with photon-number tagging retained as
// simulation-internal ground truth), receiver symmetrisation, two-threshold
// verification, and the adversary scenarios. Sampling is aggregate — pulses
// are i.i.d., so per-cell binomial/hypergeometric draws reproduce the
// per-pulse process exactly while staying fast enough for large trial
// counts.

namespace qds {

// KGP produced fewer sifted X-basis detections than the configured sample
// needs; maps to the CLI's numerical-failure exit code.
class InsufficientCountsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic, splittable randomness.
//
// xoshiro256** generator; streams are derived from (master seed, stream,
// substream) through splitmix64 so that every trial/role pair gets an
// independent generator regardless of scheduling order.
class Xoshiro256 {
public:
    Xoshiro256() : Xoshiro256(0, 0, 0) {}
    Xoshiro256(std::uint64_t master, std::uint64_t stream, std::uint64_t substream);

    std::uint64_t next();
    double uniform();                  // [0, 1), 53-bit resolution
    std::uint64_t below(std::uint64_t n);  // uniform in [0, n), n >= 1

private:
    std::array<std::uint64_t, 4> state_{};
};

// Exact inverse-CDF samplers (mode-centered outward scan with probability
// ratio recurrences), suitable for the cell sizes the simulator produces.
std::uint64_t sample_binomial(Xoshiro256& rng, std::uint64_t n, double p);
// Draws from Hypergeometric(population, successes, draws).
std::uint64_t sample_hypergeometric(Xoshiro256& rng, std::uint64_t population,
                                    std::uint64_t successes, std::uint64_t draws);

// P(Bin(n, p) < limit), evaluated exactly in log space.
double binomial_tail_below(std::uint64_t n, double p, double limit);

// ---------------------------------------------------------------------------
// Protocol domain types.

enum class PartyId : std::uint8_t { alice, bob, charlie };

struct KeyString {
    std::vector<std::uint8_t> bits;
    PartyId origin = PartyId::alice;
    int message_slot = 0;
};

enum class Provenance : std::uint8_t { direct, forwarded };

struct SymElement {
    std::uint8_t bit = 0;
    Provenance provenance = Provenance::direct;
    std::uint32_t original_position = 0;  // index in the originating key string
};

struct SymmetrisedKey {
    PartyId owner = PartyId::bob;
    std::vector<SymElement> elements;  // L elements, L/2 per provenance
};

struct Declaration {
    int message = 0;
    KeyString bob_half;      // the string generated with Bob (length L)
    KeyString charlie_half;  // the string generated with Charlie (length L)
};

struct Verdict {
    bool accepted = false;
    std::uint64_t mismatches_direct = 0;
    std::uint64_t mismatches_forwarded = 0;
    double threshold_used = 0.0;
};

// ---------------------------------------------------------------------------
// Key generation.

struct KgpConfig {
    std::uint64_t n_pulses = 0;
    ChannelParams channel;
    DecoySettings decoy;
    SiftingConvention sifting = SiftingConvention::single_px;
    // Signature length. 0 derives it from the observed sifted count
    // (largest even L with L + floor(L*k_fraction) <= sifted); a fixed value
    // raises InsufficientCountsError when the sifted count falls short.
    std::uint64_t L = 0;
    double k_fraction = 0.05;
    PartyId receiver = PartyId::bob;
};

struct KgpResult {
    KeyString sender_key;    // Alice's L bits (first L/2 kept, last L/2 forwarded)
    KeyString receiver_key;  // receiver's correlated L bits, same order
    CountStatistics stats;   // ready for the finite-size estimator
};

// One KGP run between Alice and one receiver. Identical seeds give
// bit-identical results.
KgpResult run_kgp(const KgpConfig& config, std::uint64_t rng_seed);

// Counts-only KGP with photon-class ground truth, for estimator-soundness
// studies (no key materialization).
struct TaggedKgpCounts {
    CountStatistics stats;
    // Ground truth about the kept half of the X sample:
    std::uint64_t keep_vacuum = 0;  // elements from 0-photon pulses
    std::uint64_t keep_single = 0;  // elements from 1-photon pulses
    std::uint64_t keep_errors = 0;  // mismatching elements
    std::uint64_t forward_errors = 0;
    // Ground truth about the Z sample:
    std::uint64_t z_single = 0;         // detections from 1-photon pulses
    std::uint64_t z_single_errors = 0;  // errors among those
};
TaggedKgpCounts run_kgp_counts(const KgpConfig& config, Xoshiro256& rng);

// ---------------------------------------------------------------------------
// Distribution-stage symmetrisation and messaging-stage verification.

// Each receiver keeps a seeded-random half of his own string and forwards
// the other half; forwarded elements carry their original positions.
std::pair<SymmetrisedKey, SymmetrisedKey> symmetrise(const KeyString& bob_key,
                                                     const KeyString& charlie_key,
                                                     std::uint64_t rng_seed);

// Mismatches are counted separately per provenance class against the
// matching declaration half; acceptance requires strictly fewer than
// threshold * L/2 in both classes.
Verdict verify(const Declaration& decl, const SymmetrisedKey& key, double threshold);

// ---------------------------------------------------------------------------
// Monte Carlo scenarios. All results aggregate integer counters, so any
// trial execution order (and any thread count) produces identical output.

struct FrequencyEstimate {
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;
    double frequency = 0.0;
    double wilson_low = 0.0;   // 99% score interval
    double wilson_high = 0.0;
};

// 99% Wilson score interval for a binomial frequency.
FrequencyEstimate wilson_interval(std::uint64_t successes, std::uint64_t trials);

struct HonestScenarioConfig {
    KgpConfig kgp;  // kgp.L must be set (both KGPs use the same length)
    double s_a = 0.0;
    double s_v = 0.0;
};

struct HonestScenarioResult {
    FrequencyEstimate bob_accepts;
    FrequencyEstimate charlie_accepts;  // transfer after Bob's acceptance path
    // Mismatch counts on Bob's halves, for channel-consistency checks.
    std::uint64_t direct_mismatch_sum = 0;
    std::uint64_t direct_mismatch_sumsq = 0;
    std::uint64_t forwarded_mismatch_sum = 0;
    std::uint64_t forwarded_mismatch_sumsq = 0;
};

HonestScenarioResult run_honest_scenario(const HonestScenarioConfig& config,
                                         std::uint64_t trials, std::uint64_t rng_seed,
                                         unsigned threads = 1);

struct RepudiationScenarioResult {
    FrequencyEstimate repudiation;  // Bob accepts at s_a AND Charlie rejects at s_v
    double bound_log2 = 0.0;        // analytic per-strategy bound
    // Planted Charlie-string mismatches landing in Charlie's kept half
    // (hypergeometric law check).
    std::uint64_t kept_mismatch_sum = 0;
    double kept_mismatch_mean = 0.0;
    double kept_mismatch_expected = 0.0;    // planted/2
    double kept_mismatch_sigma_mean = 0.0;  // sd of the mean under the law
};

// Plants exactly round(e_b L) and round(e_c L) mismatches at seeded-random
// positions, symmetrises, and evaluates both verdicts.
RepudiationScenarioResult run_repudiation_scenario(const AdversaryStrategy& strategy,
                                                   std::uint64_t L, double s_a, double s_v,
                                                   std::uint64_t trials, std::uint64_t rng_seed,
                                                   unsigned threads = 1);

struct ForgeryScenarioResult {
    FrequencyEstimate success;
    double exact_probability = 0.0;  // P(Bin(L/2, rate) < s_v L/2), the simulated law
};

// A forger guesses the verifier's directly-held half with i.i.d. per-bit
// error probability forger_error_rate; his own forwarded half passes
// trivially.
ForgeryScenarioResult run_forgery_scenario(double forger_error_rate, std::uint64_t L,
                                           double s_v, std::uint64_t trials,
                                           std::uint64_t rng_seed, unsigned threads = 1);

struct SoundnessResult {
    std::uint64_t trials = 0;
    std::uint64_t held_s_x0 = 0;  // bound <= tagged kept-half vacuum count
    std::uint64_t held_s_x1 = 0;
    std::uint64_t held_phi = 0;   // bound >= tagged single-photon Z error ratio
    std::uint64_t held_e_x = 0;   // bound >= tagged kept-half error rate
};

// Runs seeded KGPs, feeds the sampled counts through the estimator, and
// scores each bound against the tagged ground truth.
SoundnessResult run_estimator_soundness(const KgpConfig& config, double eps_pe, double alpha1,
                                        const EstimatorOptions& options, std::uint64_t trials,
                                        std::uint64_t rng_seed, unsigned threads = 1);

}  // namespace qds
