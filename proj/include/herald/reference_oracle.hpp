#pragma once

// Ground-truth evaluators for the heralded source. Nothing here calls into
// source_model: click probabilities, coupler factors and pair weights are all
// recomputed by direct summation or simulation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "herald/config.hpp"
#include "herald/error.hpp"
#include "herald/parallel.hpp"

namespace herald::oracle {

struct OracleResult {
    std::vector<double> probs;
    double r = 0.0;
    std::vector<double> std_error;  // per bin; zero for the direct evaluator
    std::uint64_t trials = 0;
    std::uint64_t triggers = 0;
};

/// Pair weights are summed far past double precision of the total so that
/// even the smallest reported idler probabilities are complete.
inline constexpr double kWeightCutoff = 1e-40;

/// Poisson pair weights |c_n|^2 up to the first weight below the cutoff past the mean.
[[nodiscard]] inline std::vector<double> poisson_pair_weights(double mu, double cutoff = kWeightCutoff) {
    if (mu == 0.0) {
        return {1.0};
    }
    std::vector<double> c;
    for (std::size_t n = 0;; ++n) {
        const double nd = static_cast<double>(n);
        const double w = std::exp(nd * std::log(mu) - mu - std::lgamma(nd + 1.0));
        c.push_back(w);
        if (nd > mu && w < cutoff) {
            break;
        }
    }
    return c;
}

/// Bose-Einstein pair weights (1 - nu) nu^n.
[[nodiscard]] inline std::vector<double> bose_einstein_pair_weights(double mu, double cutoff = kWeightCutoff) {
    std::vector<double> c;
    const double nu = mu / (1.0 + mu);
    for (std::size_t n = 0;; ++n) {
        const double w = std::pow(nu, static_cast<double>(n)) / (1.0 + mu);
        c.push_back(w);
        if (w < cutoff || n > 100000) {
            break;
        }
    }
    return c;
}

/// Click probability of a detector facing a single-mode chaotic field,
/// sum_k [1 - (1-eta)^k] (1-nu) nu^k summed term by term.
[[nodiscard]] inline double chaotic_click_probability(double eta, double mean) {
    if (mean == 0.0 || eta == 0.0) {
        return 0.0;
    }
    const double nu = mean / (1.0 + mean);
    double sum = 0.0;
    double weight = 1.0 - nu;
    for (std::size_t k = 1; k < 100000; ++k) {
        weight *= nu;
        const double term = -std::expm1(static_cast<double>(k) * std::log1p(-eta)) * weight;
        sum += term;
        if (weight < 1e-20 * sum) {
            break;
        }
    }
    return sum;
}

/// Per-photon fate probabilities for a trigger at output k, enumerated over
/// {lost before the coupler} and {reaches output j, detected or not}.
struct PhotonFates {
    double quiet_except_k = 0.0;  // no click at any j != k
    double quiet_everywhere = 0.0;
    double detected_at_k = 0.0;
};

[[nodiscard]] inline PhotonFates enumerate_photon_fates(const CouplingConfig& coupling, const HeraldSetup& setup,
                                                        std::size_t k) {
    PhotonFates f;
    const double lost = 1.0 - coupling.T_S;
    f.quiet_except_k += lost;
    f.quiet_everywhere += lost;
    for (std::size_t j = 0; j < setup.size(); ++j) {
        const double arrive = coupling.T_S * setup.split[j];
        const double detected = arrive * setup.detectors[j].eta;
        const double missed = arrive * (1.0 - setup.detectors[j].eta);
        f.quiet_everywhere += missed;
        if (j == k) {
            f.quiet_except_k += detected + missed;
            f.detected_at_k += detected;
        } else {
            f.quiet_except_k += missed;
        }
    }
    return f;
}

namespace detail {

inline double binomial_pmf(std::size_t n, std::size_t l, double t) {
    if (l > n) {
        return 0.0;
    }
    if (t == 0.0) {
        return l == 0 ? 1.0 : 0.0;
    }
    if (t == 1.0) {
        return l == n ? 1.0 : 0.0;
    }
    const double nd = static_cast<double>(n);
    const double ld = static_cast<double>(l);
    const double log_choose = std::lgamma(nd + 1.0) - std::lgamma(ld + 1.0) - std::lgamma(nd - ld + 1.0);
    return std::exp(log_choose + ld * std::log(t) + (nd - ld) * std::log1p(-t));
}

}  // namespace detail

/// Direct truncated summation of the postselected idler distribution for
/// arbitrary pair weights |c_n|^2, followed by convolution with the
/// geometric idler noise.
[[nodiscard]] inline OracleResult postselect_direct(std::span<const double> c_sq, const CouplingConfig& coupling,
                                                    const HeraldSetup& setup, double tau) {
    coupling.validate();
    setup.validate();
    {
        double total = 0.0;
        for (double c : c_sq) {
            herald::detail::require(c >= 0.0, "pair weights must be nonnegative");
            total += c;
        }
        herald::detail::require(std::abs(total - 1.0) <= 1e-12, "pair weights must sum to 1");
    }

    double mu = 0.0;
    for (std::size_t n = 0; n < c_sq.size(); ++n) {
        mu += static_cast<double>(n) * c_sq[n];
    }

    double signal_noise = coupling.added_S.resolve(mu);
    double idler_noise = coupling.added_I.resolve(mu);
    if (coupling.unpaired_noise) {
        signal_noise += coupling.T_S * mu;
        idler_noise += coupling.T_I * mu;
    }

    const std::size_t N = setup.size();
    std::vector<double> d(N);
    for (std::size_t j = 0; j < N; ++j) {
        const double dark = setup.detectors[j].dark_probability(tau);
        const double noise = chaotic_click_probability(setup.detectors[j].eta, setup.split[j] * signal_noise);
        d[j] = dark + (1.0 - dark) * noise;
    }

    std::vector<std::size_t> trigger_outputs;
    if (setup.any_detector_trigger()) {
        for (std::size_t k = 0; k < N; ++k) {
            trigger_outputs.push_back(k);
        }
    } else {
        trigger_outputs.push_back(std::get<SpecificDetector>(setup.trigger).index);
    }

    // Trigger probability given n pairs, summed over the accepted outputs.
    const std::size_t n_pairs = c_sq.size();
    std::vector<double> trigger_given_n(n_pairs, 0.0);
    for (std::size_t k : trigger_outputs) {
        const auto fates = enumerate_photon_fates(coupling, setup, k);
        double silent_others = 1.0;
        for (std::size_t j = 0; j < N; ++j) {
            if (j != k) {
                silent_others *= 1.0 - d[j];
            }
        }
        // a^n - b^n = (a - b) * sum_i a^i b^{n-1-i}, with a - b = detected_at_k.
        double geometric_sum = 0.0;
        double b_power = 1.0;
        for (std::size_t n = 0; n < n_pairs; ++n) {
            trigger_given_n[n] += silent_others * (fates.detected_at_k * geometric_sum + d[k] * b_power);
            geometric_sum = fates.quiet_except_k * geometric_sum + b_power;
            b_power *= fates.quiet_everywhere;
        }
    }

    OracleResult out;
    std::vector<double> post(n_pairs, 0.0);
    for (std::size_t n = 0; n < n_pairs; ++n) {
        const double joint = c_sq[n] * trigger_given_n[n];
        out.r += joint;
        if (joint == 0.0) {
            continue;
        }
        for (std::size_t l = 0; l <= n; ++l) {
            post[l] += joint * detail::binomial_pmf(n, l, coupling.T_I);
        }
    }
    if (!(out.r > 0.0)) {
        throw NumericalFailure("trigger probability is zero");
    }
    for (double& p : post) {
        p /= out.r;
    }

    const double nu = idler_noise / (1.0 + idler_noise);
    std::size_t extra = 0;
    if (nu > 0.0) {
        extra = static_cast<std::size_t>(std::ceil(std::log(1e-18) / std::log(nu)));
    }
    out.probs.assign(n_pairs + extra, 0.0);
    for (std::size_t n = 0; n < out.probs.size(); ++n) {
        double sum = 0.0;
        for (std::size_t m = 0; m <= n && m < n_pairs; ++m) {
            const std::size_t gap = n - m;
            const double noise = nu == 0.0 ? (gap == 0 ? 1.0 : 0.0)
                                           : (1.0 - nu) * std::pow(nu, static_cast<double>(gap));
            sum += post[m] * noise;
        }
        out.probs[n] = sum;
    }
    out.std_error.assign(out.probs.size(), 0.0);

    double total = 0.0;
    for (double p : out.probs) {
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw NumericalFailure("direct summation truncated too early");
    }
    return out;
}

/// Monte Carlo event simulation of the source.
///
/// Trials are grouped in fixed blocks of kBlockTrials; block b draws from a
/// std::mt19937_64 seeded with seed_seq{seed low, seed high, b}. Results do not
/// depend on the thread count.
inline constexpr std::uint64_t kBlockTrials = 4096;

[[nodiscard]] inline OracleResult mc_simulate(const PairSourceConfig& source, const CouplingConfig& coupling,
                                              const HeraldSetup& setup, std::uint64_t trials, std::uint64_t seed,
                                              unsigned threads = default_thread_count()) {
    source.validate();
    coupling.validate();
    setup.validate();
    herald::detail::require(trials >= 1, "trials must be >= 1");

    const std::size_t N = setup.size();
    const double mu = source.mu;
    double signal_noise = coupling.added_S.resolve(mu);
    double idler_noise = coupling.added_I.resolve(mu);
    if (coupling.unpaired_noise) {
        signal_noise += coupling.T_S * mu;
        idler_noise += coupling.T_I * mu;
    }
    std::vector<double> dark(N);
    std::vector<double> noise_mean(N);
    std::vector<double> cumulative_split(N);
    double running = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        dark[j] = setup.detectors[j].dark_probability(source.tau);
        noise_mean[j] = setup.split[j] * signal_noise;
        running += setup.split[j];
        cumulative_split[j] = running;
    }
    const bool any_trigger = setup.any_detector_trigger();
    const std::size_t specific = any_trigger ? 0 : std::get<SpecificDetector>(setup.trigger).index;

    const std::uint64_t blocks = (trials + kBlockTrials - 1) / kBlockTrials;
    std::vector<std::vector<std::uint64_t>> block_hist(blocks);

    parallel_for(
        blocks,
        [&](std::size_t b) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
            std::mt19937_64 rng(seq);
            std::uniform_real_distribution<double> uniform(0.0, 1.0);
            std::poisson_distribution<int> poisson_pairs(mu > 0.0 ? mu : 1.0);
            std::geometric_distribution<int> geometric_pairs(1.0 / (1.0 + mu));
            auto geometric_of = [](double mean) { return std::geometric_distribution<int>(1.0 / (1.0 + mean)); };
            std::vector<std::geometric_distribution<int>> signal_noise_dist;
            for (double m : noise_mean) {
                signal_noise_dist.push_back(geometric_of(m > 0.0 ? m : 1.0));
            }
            auto idler_noise_dist = geometric_of(idler_noise > 0.0 ? idler_noise : 1.0);
            std::vector<int> photons(N);
            auto& hist = block_hist[b];

            const std::uint64_t first = b * kBlockTrials;
            const std::uint64_t last = std::min(trials, first + kBlockTrials);
            for (std::uint64_t t = first; t < last; ++t) {
                int pairs = 0;
                if (mu > 0.0) {
                    pairs = source.statistics == PairStatistics::Poisson ? poisson_pairs(rng) : geometric_pairs(rng);
                }
                const int signal = std::binomial_distribution<int>(pairs, coupling.T_S)(rng);
                const int idler = std::binomial_distribution<int>(pairs, coupling.T_I)(rng);

                std::fill(photons.begin(), photons.end(), 0);
                for (int p = 0; p < signal; ++p) {
                    const double u = uniform(rng);
                    std::size_t j = 0;
                    while (j + 1 < N && u >= cumulative_split[j]) {
                        ++j;
                    }
                    ++photons[j];
                }
                int clicks = 0;
                bool specific_clicked = false;
                for (std::size_t j = 0; j < N; ++j) {
                    if (noise_mean[j] > 0.0) {
                        photons[j] += signal_noise_dist[j](rng);
                    }
                    const double silent =
                        (1.0 - dark[j]) * std::pow(1.0 - setup.detectors[j].eta, static_cast<double>(photons[j]));
                    if (uniform(rng) >= silent) {
                        ++clicks;
                        if (j == specific) {
                            specific_clicked = true;
                        }
                    }
                }
                const bool triggered = any_trigger ? clicks == 1 : (clicks == 1 && specific_clicked);
                if (!triggered) {
                    continue;
                }
                const int idler_total = idler + (idler_noise > 0.0 ? idler_noise_dist(rng) : 0);
                const auto bin = static_cast<std::size_t>(idler_total);
                if (hist.size() <= bin) {
                    hist.resize(bin + 1, 0);
                }
                ++hist[bin];
            }
        },
        threads);

    std::vector<std::uint64_t> hist;
    for (const auto& h : block_hist) {
        if (hist.size() < h.size()) {
            hist.resize(h.size(), 0);
        }
        for (std::size_t i = 0; i < h.size(); ++i) {
            hist[i] += h[i];
        }
    }

    OracleResult out;
    out.trials = trials;
    for (auto count : hist) {
        out.triggers += count;
    }
    out.r = static_cast<double>(out.triggers) / static_cast<double>(trials);
    if (out.triggers == 0) {
        return out;
    }
    const auto total = static_cast<double>(out.triggers);
    for (auto count : hist) {
        const double p = static_cast<double>(count) / total;
        out.probs.push_back(p);
        out.std_error.push_back(std::sqrt(p * (1.0 - p) / total));
    }
    return out;
}

}  // namespace herald::oracle
