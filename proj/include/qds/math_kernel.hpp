#pragma once

#include <cstdint>
#include <stdexcept>

// Shared numeric primitives: binary entropy and its inverse, binomial tail
// mass in log2 space, concentration-bound deviations, and the two-sample
// sampling correction used by the phase-error estimate.
//
// Probability-scale results that can underflow a double (binomial tails,
// forging exponents) are carried as base-2 logarithms end to end; conversion
// to linear scale happens at report time only.

namespace qds {

// Raised when an analysis step cannot continue and must surface a diagnostic
// (as opposed to a plain argument-domain violation, which is domain_error).
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// h(x) = -x log2 x - (1-x) log2(1-x), with h(0) = h(1) = 0 exactly.
// Throws std::domain_error outside [0,1].
double binary_entropy(double x);

// Unique x in [0, 1/2] with binary_entropy(x) = y, found by bisection
// (h is strictly increasing on [0, 1/2]); absolute tolerance 1e-12.
// Throws std::domain_error outside [0,1].
double inverse_binary_entropy(double y);

// log2 of sum_{k=0}^{r} C(n,k).
// For n <= 10^4 the sum is accumulated exactly in log space (lgamma terms);
// above that the entropy approximation n*h(r/n) is used. `exact` records
// which path produced the value so callers can assert on it.
struct Log2BinomTail {
    double log2_value = 0.0;
    bool exact = true;
};
Log2BinomTail log2_binom_tail(std::uint64_t n, std::uint64_t r);

// One-sided additive deviation sqrt(sample * ln(1/eps) / 2) for a count
// observed on `sample` trials, failing with probability at most eps.
// Throws std::domain_error unless sample >= 1 and 0 < eps < 1.
double hoeffding_delta(double sample, double eps);

// Deviation for a rate observed on a k-subset of an n-population sampled
// without replacement: sqrt( ln(1/eps_pe)/(2k) * (1 - (k-1)/n) ).
// Throws std::domain_error unless 1 <= k <= n and 0 < eps_pe < 1.
double serfling_delta(double n, double k, double eps_pe);

struct GammaOptions {
    // When the log argument falls below 1 the correction is undefined.
    // Clamping treats that regime as a zero correction; it is off by default
    // because silently weakening an upper bound is not safe, so the default
    // behavior is to raise EstimationError with a diagnostic instead.
    bool clamp_log_arg = false;
};

// Two-sample correction
//   gamma(a,b,c,d) = sqrt( (c+d)(1-b)b / (c d ln2)
//                          * log2( (c+d) / (c d (1-b) b) / a^2 ) )
// relating an error ratio b observed on a sample of size c to the
// corresponding unobserved ratio on a disjoint sample of size d, with
// failure weight a.
// b in {0,1} makes the expression singular: with clamping enabled the
// correction is 0, otherwise std::domain_error.
double gamma_correction(double a, double b, double c, double d,
                        GammaOptions options = {});

// log2(a + b) given log2 a and log2 b, stable for any magnitudes.
double log2_add(double log2_a, double log2_b);

// Linearize a log2-scale probability bound, capping at 1 (bounds above 1
// are vacuous but their uncapped exponent is still reported elsewhere).
double linear_capped(double log2_value);

}  // namespace qds
