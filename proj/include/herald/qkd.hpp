#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

#include "herald/config.hpp"
#include "herald/error.hpp"
#include "herald/source_model.hpp"

namespace herald {

/// Alice station, fiber and Bob's receiver.
struct QKDLink {
    double T_alice = 1.0;
    double alpha_db_per_km = 0.2;
    double length_km = 0.0;
    double l_bob_db = 0.0;  // apparatus loss, <= 0
    double eta_bob = 1.0;
    double dark_bob = 0.0;  // per-window dark click probability
    double intrinsic_error = 0.0;

    void validate() const {
        detail::require_probability(T_alice, "link.T_alice");
        detail::require(std::isfinite(alpha_db_per_km) && alpha_db_per_km >= 0.0, "link.alpha_db_per_km must be >= 0");
        detail::require(std::isfinite(length_km) && length_km >= 0.0, "link.L_km must be >= 0");
        detail::require(std::isfinite(l_bob_db) && l_bob_db <= 0.0, "link.l_bob_db must be <= 0");
        detail::require_probability(eta_bob, "link.eta_bob");
        detail::require(std::isfinite(dark_bob) && dark_bob >= 0.0 && dark_bob < 1.0,
                        "link.dark_bob must be in [0, 1)");
        detail::require_probability(intrinsic_error, "link.c");
    }

    [[nodiscard]] QKDLink at_length(double km) const {
        auto copy = *this;
        copy.length_km = km;
        return copy;
    }
};

struct GainBreakdown {
    double p_post = 0.0;
    double p_s_exp = 0.0;
    double p_exp = 0.0;
    double p_multi = 0.0;
    double e = 0.0;
    double c_EC = 0.0;
    double c_PA = 0.0;
    double G = 0.0;
    bool ec_valid = true;  // error correction cost inside its e <= 0.05 domain
    bool secure = false;
};

/// Fiber plus apparatus transmission 10^((-alpha L + l_bob) / 10).
[[nodiscard]] inline double transmission(const QKDLink& link) {
    link.validate();
    const double t = std::pow(10.0, (-link.alpha_db_per_km * link.length_km + link.l_bob_db) / 10.0);
    detail::require(t <= 1.0, "link transmission exceeds 1");
    return t;
}

namespace detail {

/// P(X >= 2) for X ~ Binomial(n, t).
inline double binomial_at_least_two(std::size_t n, double t) {
    if (n < 2 || t == 0.0) {
        return 0.0;
    }
    if (t == 1.0) {
        return 1.0;
    }
    const double nd = static_cast<double>(n);
    const double log_q = std::log1p(-t);
    if (nd * t >= 0.5) {
        return -std::expm1(nd * log_q) - nd * t * std::exp((nd - 1.0) * log_q);
    }
    // Small n t: the closed form cancels, sum the pmf from k = 2 upward.
    const double odds = t / (1.0 - t);
    double term = 0.5 * nd * (nd - 1.0) * t * t * std::exp((nd - 2.0) * log_q);
    double sum = 0.0;
    for (std::size_t k = 2; k <= n && term > 0.0; ++k) {
        sum += term;
        if (term < 1e-18 * sum) {
            break;
        }
        term *= odds * (nd - static_cast<double>(k)) / static_cast<double>(k + 1);
    }
    return sum;
}

}  // namespace detail

/// Probability that more than one photon leaves Alice's station.
[[nodiscard]] inline double p_multi_after_alice(const PhotonNumberDistribution& dist, double T_alice) {
    detail::require_probability(T_alice, "link.T_alice");
    double p = 0.0;
    for (std::size_t n = 2; n < dist.probs.size(); ++n) {
        p += dist.probs[n] * detail::binomial_at_least_two(n, T_alice);
    }
    return p;
}

struct ExpectedRates {
    double p_s_exp = 0.0;
    double p_exp = 0.0;
};

[[nodiscard]] inline ExpectedRates expected_rates(const PhotonNumberDistribution& dist, const QKDLink& link) {
    const double t = transmission(link) * link.T_alice * link.eta_bob;
    const double log_miss = std::log1p(-t);
    ExpectedRates rates;
    for (std::size_t n = 1; n < dist.probs.size(); ++n) {
        rates.p_s_exp += dist.probs[n] * -std::expm1(static_cast<double>(n) * log_miss);
    }
    rates.p_exp = rates.p_s_exp + link.dark_bob - rates.p_s_exp * link.dark_bob;
    return rates;
}

/// Bit error rate from intrinsic errors and random dark clicks.
[[nodiscard]] inline double error_rate(double p_s_exp, double p_exp, const QKDLink& link) {
    if (!(p_exp > 0.0)) {
        throw NoDetections("no detections");
    }
    const double c = link.intrinsic_error;
    const double d = link.dark_bob;
    return (c * p_s_exp + 0.5 * d - 0.5 * c * p_s_exp * d) / p_exp;
}

[[nodiscard]] inline double binary_entropy(double e) {
    if (e <= 0.0 || e >= 1.0) {
        return 0.0;
    }
    return -(e * std::log2(e) + (1.0 - e) * std::log2(1.0 - e));
}

struct ErrorCorrectionCost {
    double value = 0.0;
    bool valid = true;  // false beyond e = 0.05, where the 1.16 factor is an extrapolation
};

inline constexpr double kErrorCorrectionLimit = 0.05;

[[nodiscard]] inline ErrorCorrectionCost ec_cost(double e) {
    return {1.16 * binary_entropy(e), e <= kErrorCorrectionLimit};
}

/// Privacy amplification cost against single-particle attacks. Returns 1 when
/// multiphoton pulses dominate or the logarithm leaves its valid branch.
[[nodiscard]] inline double pa_cost(double e, double p_exp, double p_multi) {
    if (!(p_exp > 0.0)) {
        throw NoDetections("no detections");
    }
    const double w = (p_exp - p_multi) / p_exp;
    if (w <= 0.0) {
        return 1.0;
    }
    const double x = e / w;
    if (x >= 0.5) {
        return 1.0;
    }
    const double arg = 1.0 + 4.0 * x - 4.0 * x * x;
    if (arg <= 0.0) {
        return 1.0;
    }
    return 1.0 - w * (1.0 - std::log2(arg));
}

[[nodiscard]] inline GainBreakdown gain(const PhotonNumberDistribution& dist, const QKDLink& link) {
    GainBreakdown g;
    g.p_post = dist.r;
    const auto rates = expected_rates(dist, link);
    g.p_s_exp = rates.p_s_exp;
    g.p_exp = rates.p_exp;
    g.p_multi = p_multi_after_alice(dist, link.T_alice);
    g.e = error_rate(g.p_s_exp, g.p_exp, link);
    const auto ec = ec_cost(g.e);
    g.c_EC = ec.value;
    g.ec_valid = ec.valid;
    g.c_PA = pa_cost(g.e, g.p_exp, g.p_multi);
    g.G = 0.5 * g.p_post * g.p_exp * (1.0 - g.c_EC - g.c_PA);
    g.secure = g.G > 0.0 && g.ec_valid && g.p_exp > g.p_multi;
    return g;
}

struct MuRange {
    double lo = 1e-8;
    double hi = 10.0;
};

struct Optimum {
    double mu = 0.0;
    GainBreakdown breakdown;
};

/// Maps a mean pair number to the photon-number distribution leaving the source.
using DistributionFactory = std::function<PhotonNumberDistribution(double)>;

[[nodiscard]] inline DistributionFactory heralded_factory(const PairSourceConfig& source,
                                                          const CouplingConfig& coupling, const HeraldSetup& setup) {
    return [source, coupling, setup](double mu) { return heralded_distribution(source.with_mu(mu), coupling, setup); };
}

/// Attenuated laser: Poisson photon numbers and no postselection.
[[nodiscard]] inline DistributionFactory coherent_factory() {
    return [](double mu) {
        PairSourceConfig source;
        source.mu = mu;
        return untriggered_distribution(source, CouplingConfig{});
    };
}

namespace detail {

inline constexpr std::size_t kMuGridPoints = 60;
inline constexpr double kLogMuTolerance = 1e-7;

inline double gain_or_floor(const DistributionFactory& make, double mu, const QKDLink& link, GainBreakdown* out) {
    try {
        const auto g = gain(make(mu), link);
        if (out) {
            *out = g;
        }
        return g.G;
    } catch (const NoDetections&) {
        return -std::numeric_limits<double>::infinity();
    } catch (const NumericalFailure&) {
        return -std::numeric_limits<double>::infinity();
    }
}

}  // namespace detail

/// Maximizes G over mu: log-uniform grid, then golden-section search in log mu
/// on the bracket around the best grid point.
[[nodiscard]] inline Optimum optimize_mu(const DistributionFactory& make, const QKDLink& link, MuRange range = {}) {
    link.validate();
    detail::require(range.lo > 0.0 && range.lo < range.hi, "mu range must satisfy 0 < lo < hi");
    const double log_lo = std::log(range.lo);
    const double log_hi = std::log(range.hi);
    const std::size_t points = detail::kMuGridPoints;
    const double step = (log_hi - log_lo) / static_cast<double>(points - 1);

    std::size_t best = 0;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points; ++i) {
        const double g = detail::gain_or_floor(make, std::exp(log_lo + step * static_cast<double>(i)), link, nullptr);
        if (g > best_gain) {
            best_gain = g;
            best = i;
        }
    }

    double a = log_lo + step * static_cast<double>(best == 0 ? 0 : best - 1);
    double b = log_lo + step * static_cast<double>(std::min(best + 1, points - 1));
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double gc = detail::gain_or_floor(make, std::exp(c), link, nullptr);
    double gd = detail::gain_or_floor(make, std::exp(d), link, nullptr);
    for (int iter = 0; iter < 200 && b - a > detail::kLogMuTolerance; ++iter) {
        if (gc >= gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = detail::gain_or_floor(make, std::exp(c), link, nullptr);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = detail::gain_or_floor(make, std::exp(d), link, nullptr);
        }
    }

    // Keep whichever of the refined point and the grid winner is better.
    const double refined_log = gc >= gd ? c : d;
    const double refined_gain = std::max(gc, gd);
    const double best_log = refined_gain >= best_gain ? refined_log : log_lo + step * static_cast<double>(best);

    Optimum opt;
    opt.mu = std::exp(best_log);
    if (detail::gain_or_floor(make, opt.mu, link, &opt.breakdown) == -std::numeric_limits<double>::infinity()) {
        opt.breakdown = GainBreakdown{};
        opt.breakdown.G = -std::numeric_limits<double>::infinity();
    }
    return opt;
}

inline constexpr double kDistanceScanStep = 5.0;
inline constexpr double kDistanceTolerance = 0.01;
inline constexpr double kDistanceScanLimit = 1000.0;

/// Largest fiber length with positive optimized gain.
[[nodiscard]] inline double max_distance(const DistributionFactory& make, const QKDLink& link, MuRange range = {}) {
    auto positive = [&](double km) { return optimize_mu(make, link.at_length(km), range).breakdown.G > 0.0; };
    if (!positive(0.0)) {
        throw InsecureAtZeroDistance("insecure at zero distance");
    }
    double lo = 0.0;
    double hi = kDistanceScanStep;
    while (positive(hi)) {
        lo = hi;
        hi += kDistanceScanStep;
        if (hi > kDistanceScanLimit) {
            throw NumericalFailure("gain stays positive beyond the distance scan limit");
        }
    }
    while (hi - lo > kDistanceTolerance) {
        const double mid = 0.5 * (lo + hi);
        (positive(mid) ? lo : hi) = mid;
    }
    return lo;
}

/// G_opt(candidate) / G_opt(baseline) - 1, both optimized at the given link.
[[nodiscard]] inline double relative_gain_improvement(const DistributionFactory& candidate,
                                                      const DistributionFactory& baseline, const QKDLink& link,
                                                      MuRange range = {}) {
    const double base = optimize_mu(baseline, link, range).breakdown.G;
    if (!(base > 0.0)) {
        throw InsecureAtZeroDistance("baseline configuration is insecure");
    }
    return optimize_mu(candidate, link, range).breakdown.G / base - 1.0;
}

}  // namespace herald
