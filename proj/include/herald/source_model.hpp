#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "herald/config.hpp"
#include "herald/error.hpp"

namespace herald {

/// Photon-number distribution of the idler field, truncated with a certified tail.
struct PhotonNumberDistribution {
    std::vector<double> probs;
    /// Probability of the postselection event (1 when nothing is postselected).
    double r = 1.0;
    /// Upper bound on the probability mass beyond probs.back().
    double tail_bound = 0.0;

    [[nodiscard]] std::size_t nmax() const { return probs.empty() ? 0 : probs.size() - 1; }

    [[nodiscard]] double operator[](std::size_t n) const { return n < probs.size() ? probs[n] : 0.0; }

    [[nodiscard]] double total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }
};

/// Combined click probability of independent noise sources, 1 - prod(1 - d_i).
[[nodiscard]] inline double compose_click_noise(std::span<const double> components) {
    double log_silent = 0.0;
    for (double d : components) {
        detail::require_probability(d, "noise click probability");
        log_silent += std::log1p(-d);
    }
    return -std::expm1(log_silent);
}

/// Click probability caused by a single-mode chaotic field of the given mean.
[[nodiscard]] inline double signal_noise_click(double eta, double mean) {
    detail::require_probability(eta, "detector eta");
    detail::require(std::isfinite(mean) && mean >= 0.0, "noise mean must be finite and >= 0");
    const double detected = eta * mean;
    return detected / (1.0 + detected);
}

struct ResidualMeans {
    std::vector<double> signal;  // per coupler output
    double idler = 0.0;
};

/// Chaotic-noise mean photon numbers reaching each signal detector and the idler.
[[nodiscard]] inline ResidualMeans residual_means(const PairSourceConfig& source, const CouplingConfig& coupling,
                                                  const HeraldSetup& setup) {
    const double mu = source.mu;
    double signal_total = coupling.added_S.resolve(mu);
    double idler_total = coupling.added_I.resolve(mu);
    if (coupling.unpaired_noise) {
        signal_total += coupling.T_S * mu;
        idler_total += coupling.T_I * mu;
    }
    ResidualMeans means;
    means.signal.reserve(setup.size());
    for (double fraction : setup.split) {
        means.signal.push_back(fraction * signal_total);
    }
    means.idler = idler_total;
    return means;
}

/// Per-detector click probability with no signal photon present: dark counts
/// composed with the signal-arm chaotic noise.
[[nodiscard]] inline std::vector<double> click_noise(const PairSourceConfig& source, const CouplingConfig& coupling,
                                                     const HeraldSetup& setup) {
    const auto means = residual_means(source, coupling, setup);
    std::vector<double> d(setup.size());
    for (std::size_t j = 0; j < setup.size(); ++j) {
        const auto& det = setup.detectors[j];
        const double parts[] = {det.dark_probability(source.tau), signal_noise_click(det.eta, means.signal[j])};
        d[j] = compose_click_noise(parts);
    }
    return d;
}

/// Generating-function arguments of the coupler for a click at output k.
///
/// A is the probability that one signal photon leaves every output except k
/// silent, B the probability that it leaves all outputs silent. The
/// complements and the difference are kept separately to avoid cancellation.
struct CouplerCoefficients {
    double A = 1.0;
    double B = 1.0;
    double one_minus_A = 0.0;
    double one_minus_B = 0.0;
    double delta = 0.0;  // A - B
};

[[nodiscard]] inline CouplerCoefficients coupler_coefficients(const CouplingConfig& coupling, const HeraldSetup& setup,
                                                              std::size_t k) {
    detail::require(k < setup.size(), "detector index out of range");
    double missed_elsewhere = 0.0;  // sum_{l != k} |t_l|^2 (1 - eta_l)
    double detected_elsewhere = 0.0;
    for (std::size_t l = 0; l < setup.size(); ++l) {
        if (l == k) {
            continue;
        }
        missed_elsewhere += setup.split[l] * (1.0 - setup.detectors[l].eta);
        detected_elsewhere += setup.split[l] * setup.detectors[l].eta;
    }
    const double own = setup.split[k];
    const double own_eta = setup.detectors[k].eta;

    CouplerCoefficients c;
    c.A = coupling.R_S() + coupling.T_S * (own + missed_elsewhere);
    c.B = coupling.R_S() + coupling.T_S * (own * (1.0 - own_eta) + missed_elsewhere);
    c.delta = coupling.T_S * own * own_eta;
    c.one_minus_A = coupling.T_S * detected_elsewhere;
    c.one_minus_B = coupling.T_S * (detected_elsewhere + own * own_eta);
    return c;
}

namespace detail {

inline constexpr double kPriorTail = 1e-14;
inline constexpr double kPostTail = 1e-17;
inline constexpr double kReportTail = 1e-14;
inline constexpr std::size_t kMaxPhotons = 10000;

inline std::size_t poisson_prior_nmax(double mu) {
    return static_cast<std::size_t>(std::ceil(mu + 12.0 * std::sqrt(mu))) + 30;
}

inline std::size_t bose_einstein_prior_nmax(double nu) {
    if (nu <= 0.0) {
        return 1;
    }
    const double n = std::ceil(std::log(kPriorTail) / std::log(nu));
    return n >= static_cast<double>(kMaxPhotons) ? kMaxPhotons : std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

/// Unnormalized-free result of the signal-side postselection, before idler noise.
struct Postselected {
    std::vector<double> probs;
    double tail_bound = 0.0;
    double r_reduced = 0.0;  // r with the silent-other-detector factor removed
};

/// Poisson pairs: the idler distribution is a Poisson(mu A T_I) shape times
/// the factor 1 - (1-d_k) (B/A)^l exp(-mu R_I (A-B)), normalized by
/// 1 - (1-d_k) exp(-mu (A-B)). Both are evaluated through expm1/log1p.
inline Postselected postselect_poisson(double mu, const CouplingConfig& coupling, const CouplerCoefficients& c,
                                       double d_k) {
    const double log_silent_k = std::log1p(-d_k);
    const double norm = -std::expm1(log_silent_k - mu * c.delta);
    if (!(norm > 0.0)) {
        throw NumericalFailure("trigger probability is zero");
    }
    Postselected out;
    out.r_reduced = std::exp(-mu * c.one_minus_A) * norm;

    const double x = mu * c.A * coupling.T_I;
    const double base_log = log_silent_k - mu * coupling.R_I() * c.delta;
    const double log_ratio = c.A > 0.0 ? std::log1p(-c.delta / c.A) : -std::numeric_limits<double>::infinity();

    std::size_t limit = poisson_prior_nmax(mu);
    out.probs.reserve(limit + 1);
    double pmf = std::exp(-x);
    for (std::size_t l = 0;; ++l) {
        if (l > 0) {
            pmf *= x / static_cast<double>(l);
        }
        double p = 0.0;
        if (pmf > 0.0) {
            const double exponent = l == 0 ? base_log : base_log + static_cast<double>(l) * log_ratio;
            p = pmf * -std::expm1(exponent) / norm;
        }
        out.probs.push_back(p);
        if (l >= limit) {
            // Remaining mass is at most the Poisson tail divided by norm.
            const double next = pmf * x / static_cast<double>(l + 1);
            const double ratio = x / static_cast<double>(l + 2);
            const double bound = ratio < 1.0 ? next / (1.0 - ratio) / norm : std::numeric_limits<double>::infinity();
            if (bound <= kPostTail || pmf == 0.0) {
                out.tail_bound = pmf == 0.0 ? 0.0 : bound;
                break;
            }
            if (l >= kMaxPhotons) {
                throw NumericalFailure("photon-number truncation exceeded the maximum support");
            }
            ++limit;
        }
    }
    return out;
}

/// Bose-Einstein pairs: geometric shapes y_A^l and y_B^l with
/// y_X = nu X T_I / (1 - nu X R_I), combined in the same factored form.
inline Postselected postselect_bose_einstein(double mu, const CouplingConfig& coupling, const CouplerCoefficients& c,
                                             double d_k) {
    const double nu = mu / (1.0 + mu);
    const double one_minus_nuA = (1.0 + mu * c.one_minus_A) / (1.0 + mu);
    const double one_minus_nuB = (1.0 + mu * c.one_minus_B) / (1.0 + mu);
    const double trigger = nu * c.delta + d_k * one_minus_nuA;
    if (!(trigger > 0.0)) {
        throw NumericalFailure("trigger probability is zero");
    }
    Postselected out;
    out.r_reduced = trigger / ((1.0 + mu) * one_minus_nuA * one_minus_nuB);

    const double R_I = coupling.R_I();
    const double log_keep_A = std::log1p(-nu * c.A * R_I);
    const double log_keep_B = std::log1p(-nu * c.B * R_I);
    const double y = nu * c.A * coupling.T_I / (1.0 - nu * c.A * R_I);
    const double scale = one_minus_nuA * one_minus_nuB / ((1.0 - nu * c.A * R_I) * trigger);
    const double base_log = std::log1p(-d_k) + log_keep_A - log_keep_B;
    const double log_ratio = c.A > 0.0 ? std::log1p(-c.delta / c.A) + log_keep_A - log_keep_B
                                       : -std::numeric_limits<double>::infinity();

    std::size_t limit = bose_einstein_prior_nmax(nu);
    double power = 1.0;
    for (std::size_t l = 0;; ++l) {
        if (l > 0) {
            power *= y;
        }
        double p = 0.0;
        if (power > 0.0) {
            const double exponent = l == 0 ? base_log : base_log + static_cast<double>(l) * log_ratio;
            p = scale * power * -std::expm1(exponent);
        }
        out.probs.push_back(p);
        if (l >= limit) {
            const double bound = y < 1.0 ? scale * power * y / (1.0 - y) : std::numeric_limits<double>::infinity();
            if (bound <= kPostTail || power == 0.0) {
                out.tail_bound = power == 0.0 ? 0.0 : bound;
                break;
            }
            if (l >= kMaxPhotons) {
                throw NumericalFailure("photon-number truncation exceeded the maximum support");
            }
            ++limit;
        }
    }
    return out;
}

/// Convolves with a geometric idler-noise distribution (1-nu) nu^m via
/// q_n = (1-nu) p_n + nu q_{n-1}, which equals the nu^n f_n(x/nu) and
/// g_n(nu, y) sums of the closed forms without forming x/nu.
inline PhotonNumberDistribution mix_chaotic_noise(const std::vector<double>& post, double post_tail, double nu_noise) {
    PhotonNumberDistribution out;
    out.probs.reserve(post.size() + 16);
    double previous = 0.0;
    for (double p : post) {
        previous = (1.0 - nu_noise) * p + nu_noise * previous;
        out.probs.push_back(previous);
    }
    if (nu_noise > 0.0) {
        const double geometric = nu_noise / (1.0 - nu_noise);
        while (previous * geometric > kPostTail && out.probs.size() < kMaxPhotons) {
            previous *= nu_noise;
            out.probs.push_back(previous);
        }
        out.tail_bound = post_tail + previous * geometric;
    } else {
        out.tail_bound = post_tail;
    }
    return out;
}

/// Clamps rounding negatives, trims the support to the reporting tail and
/// checks normalization.
inline void finalize(PhotonNumberDistribution& dist) {
    double clamped = 0.0;
    for (double& p : dist.probs) {
        if (p < 0.0) {
            clamped -= p;
            p = 0.0;
        }
    }
    if (clamped > 1e-12) {
        throw NumericalFailure("negative probabilities beyond rounding");
    }
    if (clamped > 0.0) {
        const double total = dist.total();
        for (double& p : dist.probs) {
            p /= total;
        }
    }
    double suffix = dist.tail_bound;
    std::size_t keep = dist.probs.size();
    while (keep > 1 && suffix + dist.probs[keep - 1] <= kReportTail) {
        suffix += dist.probs[keep - 1];
        --keep;
    }
    dist.probs.resize(keep);
    dist.tail_bound = suffix;
    if (std::abs(dist.total() - 1.0) > 1e-10) {
        throw NumericalFailure("photon-number distribution failed to normalize");
    }
}

}  // namespace detail

/// Photon-number distribution of the idler after postselection in the signal arm.
///
/// The idler noise is already convolved in. r is r_{I,k} for a specific
/// detector and N r_{I,k} for the any-detector trigger.
[[nodiscard]] inline PhotonNumberDistribution heralded_distribution(const PairSourceConfig& source,
                                                                    const CouplingConfig& coupling,
                                                                    const HeraldSetup& setup) {
    source.validate();
    coupling.validate();
    setup.validate();

    const std::size_t k = setup.any_detector_trigger() ? 0 : std::get<SpecificDetector>(setup.trigger).index;
    const auto d = click_noise(source, coupling, setup);
    const auto coeffs = coupler_coefficients(coupling, setup, k);

    double log_silent_others = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (j != k) {
            log_silent_others += std::log1p(-d[j]);
        }
    }

    const auto post = source.statistics == PairStatistics::Poisson
                          ? detail::postselect_poisson(source.mu, coupling, coeffs, d[k])
                          : detail::postselect_bose_einstein(source.mu, coupling, coeffs, d[k]);

    const double idler_mean = residual_means(source, coupling, setup).idler;
    auto dist = detail::mix_chaotic_noise(post.probs, post.tail_bound, idler_mean / (1.0 + idler_mean));
    dist.r = std::exp(log_silent_others) * post.r_reduced;
    if (setup.any_detector_trigger()) {
        dist.r *= static_cast<double>(setup.size());
    }
    if (!(dist.r > 0.0)) {
        throw NumericalFailure("trigger probability is zero");
    }
    detail::finalize(dist);
    return dist;
}

/// Marginal idler distribution with no postselection (r = 1).
[[nodiscard]] inline PhotonNumberDistribution untriggered_distribution(const PairSourceConfig& source,
                                                                       const CouplingConfig& coupling) {
    source.validate();
    coupling.validate();
    const double mean = source.mu * coupling.T_I;
    PhotonNumberDistribution dist;
    if (source.statistics == PairStatistics::Poisson) {
        std::size_t limit = detail::poisson_prior_nmax(source.mu);
        double pmf = std::exp(-mean);
        for (std::size_t n = 0;; ++n) {
            if (n > 0) {
                pmf *= mean / static_cast<double>(n);
            }
            dist.probs.push_back(pmf);
            if (n >= limit) {
                const double ratio = mean / static_cast<double>(n + 2);
                const double bound = pmf * mean / static_cast<double>(n + 1) / (1.0 - ratio);
                if (ratio < 1.0 && bound <= detail::kPostTail) {
                    dist.tail_bound = bound;
                    break;
                }
                ++limit;
            }
        }
    } else {
        // Thinning a geometric distribution leaves it geometric.
        const double nu = mean / (1.0 + mean);
        const std::size_t limit = std::max(detail::bose_einstein_prior_nmax(nu), std::size_t{1});
        double power = 1.0;
        for (std::size_t n = 0; n <= limit; ++n) {
            dist.probs.push_back((1.0 - nu) * power);
            power *= nu;
        }
        dist.tail_bound = power;
    }
    dist.r = 1.0;
    detail::finalize(dist);
    return dist;
}

}  // namespace herald
