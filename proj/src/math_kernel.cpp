#include "qds/math_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qds {

namespace {
constexpr double kLn2 = 0.6931471805599453094172321;
}

double binary_entropy(double x) {
    if (!(x >= 0.0) || !(x <= 1.0)) {
        throw std::domain_error("binary_entropy: argument must lie in [0,1], got " +
                                std::to_string(x));
    }
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double inverse_binary_entropy(double y) {
    if (!(y >= 0.0) || !(y <= 1.0)) {
        throw std::domain_error("inverse_binary_entropy: argument must lie in [0,1], got " +
                                std::to_string(y));
    }
    if (y == 0.0) return 0.0;
    if (y == 1.0) return 0.5;
    double lo = 0.0, hi = 0.5;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (binary_entropy(mid) < y) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-12) break;
    }
    return 0.5 * (lo + hi);
}

Log2BinomTail log2_binom_tail(std::uint64_t n, std::uint64_t r) {
    if (r > n) {
        throw std::domain_error("log2_binom_tail: r must not exceed n");
    }
    Log2BinomTail out;
    if (n <= 10000) {
        // Exact: accumulate sum_{k<=r} C(n,k) in log2 space.
        double acc = -std::numeric_limits<double>::infinity();
        double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
        for (std::uint64_t k = 0; k <= r; ++k) {
            double lg = lg_n1 - std::lgamma(static_cast<double>(k) + 1.0) -
                        std::lgamma(static_cast<double>(n - k) + 1.0);
            acc = log2_add(acc, lg / kLn2);
        }
        out.log2_value = acc;
        out.exact = true;
    } else {
        double frac = static_cast<double>(r) / static_cast<double>(n);
        out.log2_value = static_cast<double>(n) * binary_entropy(frac);
        out.exact = false;
    }
    return out;
}

double hoeffding_delta(double sample, double eps) {
    if (!(sample >= 1.0)) {
        throw std::domain_error("hoeffding_delta: sample size must be >= 1");
    }
    if (!(eps > 0.0) || !(eps < 1.0)) {
        throw std::domain_error("hoeffding_delta: eps must lie in (0,1)");
    }
    return std::sqrt(sample * std::log(1.0 / eps) / 2.0);
}

double serfling_delta(double n, double k, double eps_pe) {
    if (!(k >= 1.0) || !(k <= n)) {
        throw std::domain_error("serfling_delta: need 1 <= k <= n");
    }
    if (!(eps_pe > 0.0) || !(eps_pe < 1.0)) {
        throw std::domain_error("serfling_delta: eps_pe must lie in (0,1)");
    }
    return std::sqrt(std::log(1.0 / eps_pe) / (2.0 * k) * (1.0 - (k - 1.0) / n));
}

double gamma_correction(double a, double b, double c, double d, GammaOptions options) {
    if (!(a > 0.0) || !(a < 1.0)) {
        throw std::domain_error("gamma_correction: failure weight a must lie in (0,1)");
    }
    if (!(b >= 0.0) || !(b <= 1.0)) {
        throw std::domain_error("gamma_correction: ratio b must lie in [0,1]");
    }
    if (!(c > 0.0) || !(d > 0.0)) {
        throw std::domain_error("gamma_correction: sample sizes must be positive");
    }
    if (b == 0.0 || b == 1.0) {
        if (options.clamp_log_arg) return 0.0;
        throw std::domain_error(
            "gamma_correction: ratio b=" + std::to_string(b) +
            " makes the correction singular (enable clamping to treat as 0)");
    }
    double cd = c + d;
    double bb = (1.0 - b) * b;
    double arg = cd / (c * d * bb) / (a * a);
    if (arg < 1.0) {
        if (options.clamp_log_arg) return 0.0;
        throw EstimationError(
            "gamma_correction: log argument " + std::to_string(arg) +
            " < 1 (samples c=" + std::to_string(c) + ", d=" + std::to_string(d) +
            " too large relative to failure weight); enable clamping to treat as 0");
    }
    return std::sqrt(cd * bb / (c * d * kLn2) * std::log2(arg));
}

double log2_add(double log2_a, double log2_b) {
    if (std::isinf(log2_a) && log2_a < 0.0) return log2_b;
    if (std::isinf(log2_b) && log2_b < 0.0) return log2_a;
    double hi = std::max(log2_a, log2_b);
    double lo = std::min(log2_a, log2_b);
    return hi + std::log2(1.0 + std::exp2(lo - hi));
}

double linear_capped(double log2_value) {
    if (log2_value >= 0.0) return 1.0;
    return std::exp2(log2_value);
}

}  // namespace qds
