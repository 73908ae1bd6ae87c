#pragma once

// Agreement measures between the closed forms and the reference evaluators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "herald/reference_oracle.hpp"
#include "herald/source_model.hpp"

namespace herald {

struct DirectComparison {
    double max_relative = 0.0;  // over the closed-form support
    double mass_outside = 0.0;  // direct-sum probability beyond that support
};

[[nodiscard]] inline DirectComparison compare_direct(const PhotonNumberDistribution& closed,
                                                     const oracle::OracleResult& direct) {
    DirectComparison c;
    for (std::size_t n = 0; n < closed.probs.size(); ++n) {
        const double ref = n < direct.probs.size() ? direct.probs[n] : 0.0;
        const double diff = std::abs(closed.probs[n] - ref);
        const double rel = ref == 0.0 ? (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()) : diff / ref;
        c.max_relative = std::max(c.max_relative, rel);
    }
    for (std::size_t n = closed.probs.size(); n < direct.probs.size(); ++n) {
        c.mass_outside += direct.probs[n];
    }
    return c;
}

/// Bins with fewer expected counts than this are pooled into one tail bin.
inline constexpr double kMinExpectedCount = 5.0;

/// Largest |z| of the Monte Carlo histogram against the closed form, using
/// the binomial standard error of the expected probability. The trigger rate
/// is included as one more bin.
[[nodiscard]] inline double mc_max_abs_z(const PhotonNumberDistribution& closed, const oracle::OracleResult& mc) {
    const auto triggers = static_cast<double>(mc.triggers);
    auto z_of = [](double observed, double expected, double total) {
        if (expected <= 0.0) {
            return observed > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        }
        const double p = expected / total;
        return std::abs(observed - expected) / std::sqrt(total * p * (1.0 - p));
    };

    double worst = 0.0;
    if (closed.r > 0.0 && closed.r < 1.0) {
        worst = z_of(triggers, closed.r * static_cast<double>(mc.trials), static_cast<double>(mc.trials));
    }
    if (mc.triggers == 0) {
        return worst;
    }
    double pooled_expected = 0.0;
    double pooled_observed = 0.0;
    const std::size_t bins = std::max(closed.probs.size(), mc.probs.size());
    for (std::size_t n = 0; n < bins; ++n) {
        const double expected = closed[n] * triggers;
        const double observed = (n < mc.probs.size() ? mc.probs[n] : 0.0) * triggers;
        if (expected >= kMinExpectedCount) {
            worst = std::max(worst, z_of(observed, expected, triggers));
        } else {
            pooled_expected += expected;
            pooled_observed += observed;
        }
    }
    if (pooled_expected >= kMinExpectedCount || (pooled_expected == 0.0 && pooled_observed > 0.0)) {
        worst = std::max(worst, z_of(pooled_observed, pooled_expected, triggers));
    }
    return worst;
}

/// One point of the parameter-corner grid used for oracle agreement.
struct Corner {
    PairStatistics statistics = PairStatistics::Poisson;
    double eta = 1.0;
    double dark_rate = 0.0;  // counts per second
    double theta = 1.0;
    double add_fraction = 0.0;  // added noise as a fraction of mu
};

/// eta in {0.55, 1}, dark probability in {0, 1e-7} per 1 ns, theta in {0.2, 1},
/// added noise in {0, 0.04 mu}, for both pair statistics: 32 corners.
[[nodiscard]] inline std::vector<Corner> corner_grid() {
    std::vector<Corner> grid;
    for (auto stats : {PairStatistics::Poisson, PairStatistics::BoseEinstein}) {
        for (double eta : {0.55, 1.0}) {
            for (double dark : {0.0, 100.0}) {
                for (double theta : {0.2, 1.0}) {
                    for (double add : {0.0, 0.04}) {
                        grid.push_back({stats, eta, dark, theta, add});
                    }
                }
            }
        }
    }
    return grid;
}

struct CornerCheck {
    DirectComparison direct;
    double mc_max_z = 0.0;
    std::uint64_t mc_triggers = 0;
};

struct CornerProblem {
    PairSourceConfig source;
    CouplingConfig coupling;
    HeraldSetup setup;
};

[[nodiscard]] inline CornerProblem corner_problem(const Corner& c, double mu, std::size_t n_outputs) {
    CornerProblem p;
    p.source.statistics = c.statistics;
    p.source.mu = mu;
    p.coupling = CouplingConfig::symmetric(c.theta, NoiseLevel::fraction_of_mu(c.add_fraction));
    p.setup = HeraldSetup::symmetric(n_outputs, DetectorConfig{c.eta, c.dark_rate});
    return p;
}

/// Closed form against direct summation and, when trials > 0, Monte Carlo.
[[nodiscard]] inline CornerCheck check_corner(const Corner& c, double mu, std::size_t n_outputs,
                                              std::uint64_t trials, std::uint64_t seed,
                                              unsigned threads = default_thread_count()) {
    const auto p = corner_problem(c, mu, n_outputs);
    const auto closed = heralded_distribution(p.source, p.coupling, p.setup);
    const auto weights = c.statistics == PairStatistics::Poisson ? oracle::poisson_pair_weights(mu)
                                                                 : oracle::bose_einstein_pair_weights(mu);
    CornerCheck out;
    out.direct = compare_direct(closed, oracle::postselect_direct(weights, p.coupling, p.setup, p.source.tau));
    if (trials > 0) {
        const auto mc = oracle::mc_simulate(p.source, p.coupling, p.setup, trials, seed, threads);
        out.mc_max_z = mc_max_abs_z(closed, mc);
        out.mc_triggers = mc.triggers;
    }
    return out;
}

}  // namespace herald
