#include "qds/protocol_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <thread>

#include "qds/math_kernel.hpp"

namespace qds {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream identifiers for the seeded roles inside scenarios. Each
// (master, stream, trial) triple yields an independent generator, so trials
// can run on any thread in any order without changing a single draw.
constexpr std::uint64_t kStreamKgp = 0x01;
constexpr std::uint64_t kStreamKgpBob = 0x02;
constexpr std::uint64_t kStreamKgpCharlie = 0x03;
constexpr std::uint64_t kStreamSymmetrise = 0x04;
constexpr std::uint64_t kStreamPlantBob = 0x05;
constexpr std::uint64_t kStreamPlantCharlie = 0x06;
constexpr std::uint64_t kStreamForgery = 0x07;
constexpr std::uint64_t kStreamSoundness = 0x08;

double lchoose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t master, std::uint64_t stream, std::uint64_t substream) {
    std::uint64_t sm = master;
    (void)splitmix64(sm);
    sm ^= 0xa0761d6478bd642fULL * (stream + 1);
    (void)splitmix64(sm);
    sm ^= 0xe7037ed1a0b428dbULL * (substream + 1);
    for (auto& word : state_) word = splitmix64(sm);
    // All-zero state is the one forbidden xoshiro state; splitmix output
    // makes it astronomically unlikely, but guard anyway.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[3] = 1;
}

std::uint64_t Xoshiro256::next() {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Xoshiro256::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t Xoshiro256::below(std::uint64_t n) {
    // Lemire's unbiased multiply-shift rejection method.
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = -n % n;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

namespace {

// Inverse-CDF sampling by scanning outward from the mode, with the pmf
// updated through its term ratio. Expected cost is a few standard
// deviations' worth of pmf evaluations.
template <typename Ratio>
std::uint64_t scan_from_mode(double u, std::uint64_t mode, double pmf_mode, std::uint64_t lo,
                             std::uint64_t hi, Ratio ratio_up) {
    u -= pmf_mode;
    if (u <= 0.0) return mode;
    std::uint64_t k_up = mode;
    std::uint64_t k_dn = mode;
    double p_up = pmf_mode;
    double p_dn = pmf_mode;
    while (k_up < hi || k_dn > lo) {
        if (k_up < hi) {
            p_up *= ratio_up(k_up);
            ++k_up;
            u -= p_up;
            if (u <= 0.0) return k_up;
        }
        if (k_dn > lo) {
            --k_dn;
            const double r = ratio_up(k_dn);
            p_dn = r > 0.0 ? p_dn / r : 0.0;
            u -= p_dn;
            if (u <= 0.0) return k_dn;
        }
    }
    // Floating-point leakage in the total mass; vanishing probability.
    return mode;
}

}  // namespace

std::uint64_t sample_binomial(Xoshiro256& rng, std::uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    if (p > 0.5) return n - sample_binomial(rng, n, 1.0 - p);
    const double nd = static_cast<double>(n);
    auto mode = static_cast<std::uint64_t>((nd + 1.0) * p);
    if (mode > n) mode = n;
    const double md = static_cast<double>(mode);
    const double log_pmf =
        lchoose(nd, md) + md * std::log(p) + (nd - md) * std::log1p(-p);
    const double odds = p / (1.0 - p);
    auto ratio_up = [nd, odds](std::uint64_t k) {
        const double kd = static_cast<double>(k);
        return (nd - kd) / (kd + 1.0) * odds;
    };
    return scan_from_mode(rng.uniform(), mode, std::exp(log_pmf), 0, n, ratio_up);
}

double binomial_tail_below(std::uint64_t n, double p, double limit) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("binomial_tail_below: p must lie in [0, 1]");
    if (limit <= 0.0) return 0.0;
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return static_cast<double>(n) < limit ? 1.0 : 0.0;
    const double nd = static_cast<double>(n);
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    constexpr double kLn2 = 0.6931471805599453;
    double log2_sum = -std::numeric_limits<double>::infinity();
    for (std::uint64_t j = 0; static_cast<double>(j) < limit && j <= n; ++j) {
        const double jd = static_cast<double>(j);
        const double log2_pmf = (lchoose(nd, jd) + jd * lp + (nd - jd) * lq) / kLn2;
        log2_sum = log2_add(log2_sum, log2_pmf);
    }
    return linear_capped(log2_sum);
}

std::uint64_t sample_hypergeometric(Xoshiro256& rng, std::uint64_t population,
                                    std::uint64_t successes, std::uint64_t draws) {
    if (successes > population || draws > population)
        throw std::invalid_argument("hypergeometric: successes and draws must not exceed the population");
    if (draws == 0 || successes == 0) return 0;
    if (draws == population) return successes;
    if (successes == population) return draws;
    const std::uint64_t lo = draws + successes > population ? draws + successes - population : 0;
    const std::uint64_t hi = std::min(draws, successes);
    if (lo == hi) return lo;
    const double N = static_cast<double>(population);
    const double K = static_cast<double>(successes);
    const double n = static_cast<double>(draws);
    auto mode = static_cast<std::uint64_t>((n + 1.0) * (K + 1.0) / (N + 2.0));
    mode = std::clamp(mode, lo, hi);
    const double kd = static_cast<double>(mode);
    const double log_pmf =
        lchoose(K, kd) + lchoose(N - K, n - kd) - lchoose(N, n);
    auto ratio_up = [N, K, n](std::uint64_t k) {
        const double x = static_cast<double>(k);
        return (K - x) * (n - x) / ((x + 1.0) * (N - K - n + x + 1.0));
    };
    return scan_from_mode(rng.uniform(), mode, std::exp(log_pmf), lo, hi, ratio_up);
}

namespace {

// --- Aggregate pulse bookkeeping ------------------------------------------
//
// Pulses are i.i.d., so the joint distribution of (intensity, basis, photon
// class, detection, error) counts is a chain of binomials. Sampling those
// counts directly is exactly equivalent to simulating pulse by pulse, and
// the photon class is retained as tagged ground truth.

struct ClassLaw {
    std::array<double, 3> occupancy{};      // P(class) for classes {0, 1, 2+}
    std::array<double, 3> yield{};          // P(detection | class)
    std::array<double, 3> error_ratio{};    // P(error | detection, class)
};

ClassLaw class_law(double u, double eta, double p_d, double q) {
    ClassLaw law;
    law.occupancy[0] = std::exp(-u);
    law.occupancy[1] = u * std::exp(-u);
    law.occupancy[2] = std::max(0.0, 1.0 - law.occupancy[0] - law.occupancy[1]);
    law.yield[0] = photon_yield(0, eta, p_d);
    law.yield[1] = photon_yield(1, eta, p_d);
    const double rate = detection_rate(u, eta, p_d);
    if (law.occupancy[2] > 0.0) {
        const double residual =
            rate - law.occupancy[0] * law.yield[0] - law.occupancy[1] * law.yield[1];
        law.yield[2] = std::clamp(residual / law.occupancy[2], 0.0, 1.0);
    }
    const double miss = std::exp(-u * eta);
    const double weight_total = (1.0 - miss) * q + miss * p_d;
    const std::array<double, 2> w{photon_error_weight(0, eta, p_d, q),
                                  photon_error_weight(1, eta, p_d, q)};
    // A lone dark count picks a uniform random bit: error ratio 1/2.
    law.error_ratio[0] = law.yield[0] > 0.0 ? std::clamp(w[0] / law.yield[0], 0.0, 1.0) : 0.0;
    law.error_ratio[1] = law.yield[1] > 0.0 ? std::clamp(w[1] / law.yield[1], 0.0, 1.0) : 0.0;
    if (law.occupancy[2] > 0.0 && law.yield[2] > 0.0) {
        const double residual =
            weight_total - law.occupancy[0] * w[0] - law.occupancy[1] * w[1];
        law.error_ratio[2] =
            std::clamp(residual / law.occupancy[2] / law.yield[2], 0.0, 1.0);
    }
    return law;
}

struct CellCounts {
    std::array<std::uint64_t, 3> detections{};  // by photon class
    std::array<std::uint64_t, 3> errors{};
};

CellCounts sample_cell(Xoshiro256& rng, std::uint64_t pulses, const ClassLaw& law) {
    CellCounts cell;
    std::array<std::uint64_t, 3> occupancy{};
    occupancy[0] = sample_binomial(rng, pulses, law.occupancy[0]);
    const std::uint64_t rest = pulses - occupancy[0];
    const double renorm = law.occupancy[0] < 1.0
                              ? std::min(law.occupancy[1] / (1.0 - law.occupancy[0]), 1.0)
                              : 0.0;
    occupancy[1] = sample_binomial(rng, rest, renorm);
    occupancy[2] = rest - occupancy[1];
    for (int c = 0; c < 3; ++c) {
        cell.detections[c] = sample_binomial(rng, occupancy[c], law.yield[c]);
        cell.errors[c] = sample_binomial(rng, cell.detections[c], law.error_ratio[c]);
    }
    return cell;
}

// X-basis population indexed by (intensity, photon class, error flag).
struct XPopulation {
    std::array<std::uint64_t, 18> cells{};
    static int index(int intensity, int cls, int err) { return (intensity * 3 + cls) * 2 + err; }
    std::uint64_t total() const { return std::accumulate(cells.begin(), cells.end(), std::uint64_t{0}); }
};

// Draws `draws` elements uniformly without replacement; the per-cell counts
// follow the multivariate hypergeometric law sampled cell by cell.
XPopulation subsample(Xoshiro256& rng, const XPopulation& from, std::uint64_t draws) {
    XPopulation out;
    std::uint64_t remaining_total = from.total();
    std::uint64_t remaining_draws = draws;
    for (std::size_t i = 0; i < from.cells.size() && remaining_draws > 0; ++i) {
        const std::uint64_t got =
            sample_hypergeometric(rng, remaining_total, from.cells[i], remaining_draws);
        out.cells[i] = got;
        remaining_total -= from.cells[i];
        remaining_draws -= got;
    }
    return out;
}

XPopulation minus(const XPopulation& a, const XPopulation& b) {
    XPopulation out;
    for (std::size_t i = 0; i < a.cells.size(); ++i) out.cells[i] = a.cells[i] - b.cells[i];
    return out;
}

struct SampledKgp {
    TaggedKgpCounts tagged;
    std::uint64_t v_errors = 0;
};

SampledKgp sample_kgp(const KgpConfig& config, Xoshiro256& rng) {
    config.channel.validate();
    config.decoy.validate();
    if (config.n_pulses == 0) throw std::invalid_argument("kgp: n_pulses must be positive");
    if (!(config.k_fraction > 0.0 && config.k_fraction < 1.0))
        throw std::invalid_argument("kgp: k_fraction must lie in (0, 1)");

    const double eta = system_transmittance(config.channel);
    const double p_d = config.channel.dark_count_prob;

    // Intensity choice, then basis sifting.
    std::array<std::uint64_t, 3> per_intensity{};
    const auto& probs = config.decoy.intensity_probs;
    per_intensity[0] = sample_binomial(rng, config.n_pulses, probs[0]);
    std::uint64_t rest = config.n_pulses - per_intensity[0];
    const double renorm = probs[0] < 1.0 ? std::min(probs[1] / (1.0 - probs[0]), 1.0) : 0.0;
    per_intensity[1] = sample_binomial(rng, rest, renorm);
    per_intensity[2] = rest - per_intensity[1];

    const double px = config.decoy.basis_prob_x;
    double x_share = px;
    double z_share_renorm = 1.0;  // share of Z among the non-X remainder
    if (config.sifting == SiftingConvention::squared_px) {
        x_share = px * px;
        z_share_renorm = std::min((1.0 - px) * (1.0 - px) / (1.0 - x_share), 1.0);
    }

    XPopulation x_pop;
    SampledKgp out;
    auto& stats = out.tagged.stats;
    for (int i = 0; i < 3; ++i) {
        const double u = config.decoy.intensities[i];
        const std::uint64_t in_x = sample_binomial(rng, per_intensity[i], x_share);
        std::uint64_t in_z = per_intensity[i] - in_x;
        if (config.sifting == SiftingConvention::squared_px)
            in_z = sample_binomial(rng, in_z, z_share_renorm);

        const ClassLaw x_law = class_law(u, eta, p_d, config.channel.optical_error_x);
        const CellCounts x_cell = sample_cell(rng, in_x, x_law);
        for (int c = 0; c < 3; ++c) {
            x_pop.cells[XPopulation::index(i, c, 0)] = x_cell.detections[c] - x_cell.errors[c];
            x_pop.cells[XPopulation::index(i, c, 1)] = x_cell.errors[c];
        }

        const ClassLaw z_law = class_law(u, eta, p_d, config.channel.optical_error_z);
        const CellCounts z_cell = sample_cell(rng, in_z, z_law);
        stats.n_z[i] = static_cast<double>(z_cell.detections[0] + z_cell.detections[1] +
                                           z_cell.detections[2]);
        stats.m_z[i] =
            static_cast<double>(z_cell.errors[0] + z_cell.errors[1] + z_cell.errors[2]);
        out.tagged.z_single += z_cell.detections[1];
        out.tagged.z_single_errors += z_cell.errors[1];
    }

    const std::uint64_t sifted = x_pop.total();
    std::uint64_t L = config.L;
    if (L == 0) {
        // Largest even L whose L + floor(L*k_fraction) fits the sifted count.
        L = 2 * static_cast<std::uint64_t>(
                    static_cast<double>(sifted) / (1.0 + config.k_fraction) / 2.0);
        while (L >= 2 &&
               L + static_cast<std::uint64_t>(static_cast<double>(L) * config.k_fraction) > sifted)
            L -= 2;
    }
    if (L < 2 || L % 2 != 0)
        throw InsufficientCountsError("kgp: signature length must be a positive even number");
    const auto k =
        static_cast<std::uint64_t>(static_cast<double>(L) * config.k_fraction);
    if (k < 1)
        throw InsufficientCountsError("kgp: sample too small to carve out a test subsample");
    if (sifted < L + k)
        throw InsufficientCountsError("kgp: sifted X count " + std::to_string(sifted) +
                                      " below required " + std::to_string(L + k));

    const XPopulation selected = subsample(rng, x_pop, L + k);
    const XPopulation test = subsample(rng, selected, k);
    const XPopulation signing = minus(selected, test);
    const XPopulation keep = subsample(rng, signing, L / 2);
    const XPopulation forward = minus(signing, keep);

    stats.L = L;
    stats.k = k;
    stats.n = L / 2;
    for (int i = 0; i < 3; ++i) {
        double selected_i = 0.0;
        for (int c = 0; c < 3; ++c)
            for (int e = 0; e < 2; ++e)
                selected_i += static_cast<double>(selected.cells[XPopulation::index(i, c, e)]);
        stats.n_x[i] = selected_i;
    }
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) {
            out.v_errors += test.cells[XPopulation::index(i, c, 1)];
            out.tagged.keep_errors += keep.cells[XPopulation::index(i, c, 1)];
            out.tagged.forward_errors += forward.cells[XPopulation::index(i, c, 1)];
        }
        for (int e = 0; e < 2; ++e) {
            out.tagged.keep_vacuum += keep.cells[XPopulation::index(i, 0, e)];
            out.tagged.keep_single += keep.cells[XPopulation::index(i, 1, e)];
        }
    }
    stats.observed_ex = static_cast<double>(out.v_errors) / static_cast<double>(k);
    stats.validate();
    return out;
}

// Scatters `flips` mismatches uniformly over a fresh length-n bit vector.
void plant_random_bits(Xoshiro256& rng, std::vector<std::uint8_t>& bits, std::uint64_t n,
                       std::uint64_t flips, std::vector<std::uint32_t>& scratch) {
    bits.assign(n, 0);
    scratch.resize(n);
    std::iota(scratch.begin(), scratch.end(), 0u);
    flips = std::min(flips, n);
    for (std::uint64_t j = 0; j < flips; ++j) {
        const std::uint64_t pick = j + rng.below(n - j);
        std::swap(scratch[j], scratch[pick]);
        bits[scratch[j]] = 1;
    }
}

void symmetrise_impl(const KeyString& bob_key, const KeyString& charlie_key, Xoshiro256& rng,
                     SymmetrisedKey& bob_out, SymmetrisedKey& charlie_out,
                     std::vector<std::uint32_t>& scratch) {
    const std::size_t length = bob_key.bits.size();
    if (length == 0 || length % 2 != 0 || charlie_key.bits.size() != length)
        throw std::invalid_argument("symmetrise: keys must share a positive even length");
    const std::size_t half = length / 2;

    bob_out.owner = PartyId::bob;
    charlie_out.owner = PartyId::charlie;
    bob_out.elements.clear();
    charlie_out.elements.clear();
    bob_out.elements.reserve(length);
    charlie_out.elements.reserve(length);

    auto split = [&](const KeyString& key, SymmetrisedKey& keeper, SymmetrisedKey& taker) {
        scratch.resize(length);
        std::iota(scratch.begin(), scratch.end(), 0u);
        for (std::size_t j = 0; j < half; ++j) {
            const std::uint64_t pick = j + rng.below(length - j);
            std::swap(scratch[j], scratch[pick]);
        }
        std::sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(half));
        std::sort(scratch.begin() + static_cast<std::ptrdiff_t>(half), scratch.end());
        for (std::size_t j = 0; j < half; ++j)
            keeper.elements.push_back({key.bits[scratch[j]], Provenance::direct, scratch[j]});
        for (std::size_t j = half; j < length; ++j)
            taker.elements.push_back({key.bits[scratch[j]], Provenance::forwarded, scratch[j]});
    };
    split(bob_key, bob_out, charlie_out);
    split(charlie_key, charlie_out, bob_out);
}

template <typename Acc, typename Work>
Acc run_trials(std::uint64_t trials, unsigned threads, Work work) {
    if (threads <= 1) {
        Acc acc{};
        for (std::uint64_t t = 0; t < trials; ++t) work(t, acc);
        return acc;
    }
    std::vector<Acc> partial(threads);
    std::atomic<std::uint64_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            std::uint64_t t;
            while ((t = cursor.fetch_add(1, std::memory_order_relaxed)) < trials)
                work(t, partial[w]);
        });
    }
    for (auto& th : pool) th.join();
    // Every accumulator field is an integer count, so merging is exact and
    // independent of how trials were distributed.
    Acc total{};
    for (const auto& acc : partial) total.merge(acc);
    return total;
}

}  // namespace

KgpResult run_kgp(const KgpConfig& config, std::uint64_t rng_seed) {
    Xoshiro256 rng(rng_seed, kStreamKgp, 0);
    const SampledKgp sampled = sample_kgp(config, rng);
    const std::uint64_t L = sampled.tagged.stats.L;
    const std::uint64_t half = L / 2;

    KgpResult result;
    result.stats = sampled.tagged.stats;
    result.sender_key.origin = PartyId::alice;
    result.receiver_key.origin = config.receiver;
    result.sender_key.bits.resize(L);
    for (auto& bit : result.sender_key.bits) bit = static_cast<std::uint8_t>(rng.next() & 1u);

    // Receiver bits differ from Alice's at uniformly placed positions, the
    // kept and forwarded halves carrying their sampled error counts.
    std::vector<std::uint8_t> mism;
    std::vector<std::uint32_t> scratch;
    result.receiver_key.bits = result.sender_key.bits;
    plant_random_bits(rng, mism, half, sampled.tagged.keep_errors, scratch);
    for (std::uint64_t j = 0; j < half; ++j) result.receiver_key.bits[j] ^= mism[j];
    plant_random_bits(rng, mism, half, sampled.tagged.forward_errors, scratch);
    for (std::uint64_t j = 0; j < half; ++j) result.receiver_key.bits[half + j] ^= mism[j];
    return result;
}

TaggedKgpCounts run_kgp_counts(const KgpConfig& config, Xoshiro256& rng) {
    return sample_kgp(config, rng).tagged;
}

std::pair<SymmetrisedKey, SymmetrisedKey> symmetrise(const KeyString& bob_key,
                                                     const KeyString& charlie_key,
                                                     std::uint64_t rng_seed) {
    Xoshiro256 rng(rng_seed, kStreamSymmetrise, 0);
    std::pair<SymmetrisedKey, SymmetrisedKey> out;
    std::vector<std::uint32_t> scratch;
    symmetrise_impl(bob_key, charlie_key, rng, out.first, out.second, scratch);
    return out;
}

Verdict verify(const Declaration& decl, const SymmetrisedKey& key, double threshold) {
    const std::size_t length = key.elements.size();
    if (length == 0 || length % 2 != 0)
        throw std::invalid_argument("verify: symmetrised key must have positive even length");
    if (decl.bob_half.bits.size() != length || decl.charlie_half.bits.size() != length)
        throw std::invalid_argument("verify: declaration halves must match the key length");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw std::invalid_argument("verify: threshold must lie in [0, 1]");

    const KeyString& own =
        key.owner == PartyId::charlie ? decl.charlie_half : decl.bob_half;
    const KeyString& other =
        key.owner == PartyId::charlie ? decl.bob_half : decl.charlie_half;

    Verdict verdict;
    verdict.threshold_used = threshold;
    for (const auto& element : key.elements) {
        const KeyString& reference = element.provenance == Provenance::direct ? own : other;
        if (reference.bits[element.original_position] != element.bit) {
            if (element.provenance == Provenance::direct)
                ++verdict.mismatches_direct;
            else
                ++verdict.mismatches_forwarded;
        }
    }
    const double limit = threshold * static_cast<double>(length) / 2.0;
    verdict.accepted = static_cast<double>(verdict.mismatches_direct) < limit &&
                       static_cast<double>(verdict.mismatches_forwarded) < limit;
    return verdict;
}

FrequencyEstimate wilson_interval(std::uint64_t successes, std::uint64_t trials) {
    FrequencyEstimate est;
    est.trials = trials;
    est.successes = successes;
    if (trials == 0) return est;
    constexpr double z = 2.5758293035489004;  // two-sided 99%
    const double T = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / T;
    est.frequency = p;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / T;
    const double center = p + z2 / (2.0 * T);
    const double half = z * std::sqrt(p * (1.0 - p) / T + z2 / (4.0 * T * T));
    est.wilson_low = std::max(0.0, (center - half) / denom);
    est.wilson_high = std::min(1.0, (center + half) / denom);
    return est;
}

namespace {

struct HonestAccumulator {
    std::uint64_t bob_accepts = 0;
    std::uint64_t charlie_accepts = 0;
    std::uint64_t direct_sum = 0;
    std::uint64_t direct_sumsq = 0;
    std::uint64_t forwarded_sum = 0;
    std::uint64_t forwarded_sumsq = 0;
    void merge(const HonestAccumulator& other) {
        bob_accepts += other.bob_accepts;
        charlie_accepts += other.charlie_accepts;
        direct_sum += other.direct_sum;
        direct_sumsq += other.direct_sumsq;
        forwarded_sum += other.forwarded_sum;
        forwarded_sumsq += other.forwarded_sumsq;
    }
};

}  // namespace

HonestScenarioResult run_honest_scenario(const HonestScenarioConfig& config,
                                         std::uint64_t trials, std::uint64_t rng_seed,
                                         unsigned threads) {
    if (config.kgp.L == 0)
        throw std::invalid_argument(
            "honest scenario: a fixed signature length is required so both key pairs agree");
    if (!(config.s_a > 0.0 && config.s_a <= config.s_v && config.s_v <= 1.0))
        throw std::invalid_argument("honest scenario: need 0 < s_a <= s_v <= 1");

    auto work = [&](std::uint64_t t, HonestAccumulator& acc) {
        KgpConfig bob_cfg = config.kgp;
        bob_cfg.receiver = PartyId::bob;
        KgpConfig charlie_cfg = config.kgp;
        charlie_cfg.receiver = PartyId::charlie;

        Xoshiro256 rng_bob(rng_seed, kStreamKgpBob, t);
        Xoshiro256 rng_charlie(rng_seed, kStreamKgpCharlie, t);
        Xoshiro256 rng_sym(rng_seed, kStreamSymmetrise, t);

        const SampledKgp kgp_bob = sample_kgp(bob_cfg, rng_bob);
        const SampledKgp kgp_charlie = sample_kgp(charlie_cfg, rng_charlie);

        // Materialize the four strings from the sampled error counts.
        auto materialize = [](Xoshiro256& rng, const SampledKgp& kgp, PartyId receiver,
                              KeyString& sender, KeyString& receiver_key) {
            const std::uint64_t L = kgp.tagged.stats.L;
            const std::uint64_t half = L / 2;
            sender.origin = PartyId::alice;
            receiver_key.origin = receiver;
            sender.bits.resize(L);
            for (auto& bit : sender.bits) bit = static_cast<std::uint8_t>(rng.next() & 1u);
            receiver_key.bits = sender.bits;
            std::vector<std::uint8_t> mism;
            std::vector<std::uint32_t> scratch;
            plant_random_bits(rng, mism, half, kgp.tagged.keep_errors, scratch);
            for (std::uint64_t j = 0; j < half; ++j) receiver_key.bits[j] ^= mism[j];
            plant_random_bits(rng, mism, half, kgp.tagged.forward_errors, scratch);
            for (std::uint64_t j = 0; j < half; ++j) receiver_key.bits[half + j] ^= mism[j];
        };

        Declaration decl;
        KeyString bob_key;
        KeyString charlie_key;
        materialize(rng_bob, kgp_bob, PartyId::bob, decl.bob_half, bob_key);
        materialize(rng_charlie, kgp_charlie, PartyId::charlie, decl.charlie_half, charlie_key);

        SymmetrisedKey sym_bob;
        SymmetrisedKey sym_charlie;
        std::vector<std::uint32_t> scratch;
        symmetrise_impl(bob_key, charlie_key, rng_sym, sym_bob, sym_charlie, scratch);

        const Verdict vb = verify(decl, sym_bob, config.s_a);
        const Verdict vc = verify(decl, sym_charlie, config.s_v);
        acc.bob_accepts += vb.accepted ? 1 : 0;
        acc.charlie_accepts += vc.accepted ? 1 : 0;
        acc.direct_sum += vb.mismatches_direct;
        acc.direct_sumsq += vb.mismatches_direct * vb.mismatches_direct;
        acc.forwarded_sum += vb.mismatches_forwarded;
        acc.forwarded_sumsq += vb.mismatches_forwarded * vb.mismatches_forwarded;
    };

    const auto acc = run_trials<HonestAccumulator>(trials, threads, work);
    HonestScenarioResult result;
    result.bob_accepts = wilson_interval(acc.bob_accepts, trials);
    result.charlie_accepts = wilson_interval(acc.charlie_accepts, trials);
    result.direct_mismatch_sum = acc.direct_sum;
    result.direct_mismatch_sumsq = acc.direct_sumsq;
    result.forwarded_mismatch_sum = acc.forwarded_sum;
    result.forwarded_mismatch_sumsq = acc.forwarded_sumsq;
    return result;
}

namespace {

struct RepudiationAccumulator {
    std::uint64_t successes = 0;
    std::uint64_t kept_mismatches = 0;
    void merge(const RepudiationAccumulator& other) {
        successes += other.successes;
        kept_mismatches += other.kept_mismatches;
    }
};

}  // namespace

RepudiationScenarioResult run_repudiation_scenario(const AdversaryStrategy& strategy,
                                                   std::uint64_t L, double s_a, double s_v,
                                                   std::uint64_t trials, std::uint64_t rng_seed,
                                                   unsigned threads) {
    if (strategy.kind != AdversaryStrategy::Kind::repudiating_alice)
        throw std::invalid_argument("repudiation scenario: wrong adversary kind");
    if (L < 2 || L % 2 != 0) throw std::invalid_argument("repudiation scenario: L must be even and positive");
    if (!(strategy.e_b >= 0.0 && strategy.e_b <= 1.0 && strategy.e_c >= 0.0 && strategy.e_c <= 1.0))
        throw std::invalid_argument("repudiation scenario: declaration error rates must lie in [0, 1]");
    if (!(s_a >= 0.0 && s_a <= s_v && s_v <= 1.0))
        throw std::invalid_argument("repudiation scenario: need 0 <= s_a <= s_v <= 1");

    const auto planted_b =
        static_cast<std::uint64_t>(std::llround(strategy.e_b * static_cast<double>(L)));
    const auto planted_c =
        static_cast<std::uint64_t>(std::llround(strategy.e_c * static_cast<double>(L)));

    auto work = [&](std::uint64_t t, RepudiationAccumulator& acc) {
        Xoshiro256 rng_plant_b(rng_seed, kStreamPlantBob, t);
        Xoshiro256 rng_plant_c(rng_seed, kStreamPlantCharlie, t);
        Xoshiro256 rng_sym(rng_seed, kStreamSymmetrise, t);

        // Receivers hold the honest strings; Alice declares versions with
        // exactly the planted number of flips.
        KeyString bob_key;
        KeyString charlie_key;
        bob_key.origin = PartyId::bob;
        charlie_key.origin = PartyId::charlie;
        bob_key.bits.assign(L, 0);
        charlie_key.bits.assign(L, 0);

        Declaration decl;
        std::vector<std::uint32_t> scratch;
        plant_random_bits(rng_plant_b, decl.bob_half.bits, L, planted_b, scratch);
        plant_random_bits(rng_plant_c, decl.charlie_half.bits, L, planted_c, scratch);

        SymmetrisedKey sym_bob;
        SymmetrisedKey sym_charlie;
        symmetrise_impl(bob_key, charlie_key, rng_sym, sym_bob, sym_charlie, scratch);

        const Verdict vb = verify(decl, sym_bob, s_a);
        const Verdict vc = verify(decl, sym_charlie, s_v);
        acc.successes += (vb.accepted && !vc.accepted) ? 1 : 0;
        // Planted Charlie-half flips landing in Charlie's kept half are
        // exactly his direct mismatches against the honest all-zero string.
        acc.kept_mismatches += vc.mismatches_direct;
    };

    const auto acc = run_trials<RepudiationAccumulator>(trials, threads, work);
    RepudiationScenarioResult result;
    result.repudiation = wilson_interval(acc.successes, trials);
    result.bound_log2 = repudiation_strategy_bounds(strategy, s_a, s_v, L);
    result.kept_mismatch_sum = acc.kept_mismatches;
    if (trials > 0)
        result.kept_mismatch_mean =
            static_cast<double>(acc.kept_mismatches) / static_cast<double>(trials);
    result.kept_mismatch_expected = static_cast<double>(planted_c) / 2.0;
    if (L > 1 && trials > 0) {
        const double Ld = static_cast<double>(L);
        const double share = static_cast<double>(planted_c) / Ld;
        const double variance = (Ld / 2.0) * share * (1.0 - share) * (Ld / 2.0) / (Ld - 1.0);
        result.kept_mismatch_sigma_mean = std::sqrt(variance / static_cast<double>(trials));
    }
    return result;
}

namespace {

struct ForgeryAccumulator {
    std::uint64_t successes = 0;
    void merge(const ForgeryAccumulator& other) { successes += other.successes; }
};

}  // namespace

ForgeryScenarioResult run_forgery_scenario(double forger_error_rate, std::uint64_t L, double s_v,
                                           std::uint64_t trials, std::uint64_t rng_seed,
                                           unsigned threads) {
    if (L < 2 || L % 2 != 0) throw std::invalid_argument("forgery scenario: L must be even and positive");
    if (!(forger_error_rate >= 0.0 && forger_error_rate <= 1.0))
        throw std::invalid_argument("forgery scenario: forger error rate must lie in [0, 1]");
    if (!(s_v >= 0.0 && s_v <= 1.0))
        throw std::invalid_argument("forgery scenario: s_v must lie in [0, 1]");

    const std::uint64_t half = L / 2;
    const double limit = s_v * static_cast<double>(half);

    auto work = [&](std::uint64_t t, ForgeryAccumulator& acc) {
        Xoshiro256 rng(rng_seed, kStreamForgery, t);
        const std::uint64_t mismatches = sample_binomial(rng, half, forger_error_rate);
        acc.successes += static_cast<double>(mismatches) < limit ? 1 : 0;
    };
    const auto acc = run_trials<ForgeryAccumulator>(trials, threads, work);

    ForgeryScenarioResult result;
    result.success = wilson_interval(acc.successes, trials);
    result.exact_probability = binomial_tail_below(half, forger_error_rate, limit);
    return result;
}

namespace {

struct SoundnessAccumulator {
    std::uint64_t trials = 0;
    std::uint64_t held_s_x0 = 0;
    std::uint64_t held_s_x1 = 0;
    std::uint64_t held_phi = 0;
    std::uint64_t held_e_x = 0;
    void merge(const SoundnessAccumulator& other) {
        trials += other.trials;
        held_s_x0 += other.held_s_x0;
        held_s_x1 += other.held_s_x1;
        held_phi += other.held_phi;
        held_e_x += other.held_e_x;
    }
};

}  // namespace

SoundnessResult run_estimator_soundness(const KgpConfig& config, double eps_pe, double alpha1,
                                        const EstimatorOptions& options, std::uint64_t trials,
                                        std::uint64_t rng_seed, unsigned threads) {
    auto work = [&](std::uint64_t t, SoundnessAccumulator& acc) {
        Xoshiro256 rng(rng_seed, kStreamSoundness, t);
        const TaggedKgpCounts tagged = run_kgp_counts(config, rng);
        ++acc.trials;
        FiniteSizeEstimates est;
        try {
            est = estimate(tagged.stats, config.decoy, eps_pe, alpha1, options);
        } catch (const EstimationError&) {
            return;  // counts every bound as violated for this trial
        }
        const double n = static_cast<double>(tagged.stats.n);
        if (est.s_x0_lower <= static_cast<double>(tagged.keep_vacuum) + 1e-9) ++acc.held_s_x0;
        if (est.s_x1_lower <= static_cast<double>(tagged.keep_single) + 1e-9) ++acc.held_s_x1;
        const double phi_truth =
            tagged.z_single > 0
                ? static_cast<double>(tagged.z_single_errors) / static_cast<double>(tagged.z_single)
                : 0.0;
        if (est.phi_x1_upper >= phi_truth - 1e-12) ++acc.held_phi;
        const double e_x_truth = static_cast<double>(tagged.keep_errors) / n;
        if (est.e_x_upper >= e_x_truth - 1e-12) ++acc.held_e_x;
    };
    const auto acc = run_trials<SoundnessAccumulator>(trials, threads, work);
    SoundnessResult result;
    result.trials = acc.trials;
    result.held_s_x0 = acc.held_s_x0;
    result.held_s_x1 = acc.held_s_x1;
    result.held_phi = acc.held_phi;
    result.held_e_x = acc.held_e_x;
    return result;
}

}  // namespace qds
