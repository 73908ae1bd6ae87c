#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "herald/error.hpp"

namespace herald {

/// Singles and coincidence click probabilities per window at one pump power.
struct RateMeasurement {
    double power = 0.0;  // W
    double n_S = 0.0;
    double n_I = 0.0;
    double n_c = 0.0;
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] bool contains(double x) const { return lo <= x && x <= hi; }
};

struct Slopes {
    Estimate b_S;
    Estimate b_I;
    Estimate b_c;
};

namespace detail {

/// Least squares slope through a fixed intercept: y - intercept = b x.
inline Estimate fixed_intercept_slope(std::span<const double> x, std::span<const double> y, double intercept) {
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * (y[i] - intercept);
    }
    if (!(sxx > 0.0)) {
        throw FitError("fit needs nonzero pump powers");
    }
    Estimate e;
    e.value = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double res = y[i] - intercept - e.value * x[i];
        ss += res * res;
    }
    // One fitted parameter.
    e.std_error = std::sqrt(ss / static_cast<double>(x.size() - 1) / sxx);
    return e;
}

}  // namespace detail

/// Linear fits of the rates against pump power with the dark-count terms as
/// fixed intercepts (d_S, d_I and d_S d_I for the coincidences).
[[nodiscard]] inline Slopes fit_slopes(std::span<const RateMeasurement> data, double dark_S, double dark_I) {
    detail::require_probability(dark_S, "dark_S");
    detail::require_probability(dark_I, "dark_I");
    std::vector<double> powers;
    std::vector<double> n_S;
    std::vector<double> n_I;
    std::vector<double> n_c;
    for (const auto& m : data) {
        detail::require(std::isfinite(m.power) && m.power >= 0.0, "pump power must be >= 0");
        detail::require_probability(m.n_S, "n_S");
        detail::require_probability(m.n_I, "n_I");
        detail::require_probability(m.n_c, "n_c");
        powers.push_back(m.power);
        n_S.push_back(m.n_S);
        n_I.push_back(m.n_I);
        n_c.push_back(m.n_c);
    }
    auto distinct = powers;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) {
        throw FitError("fit needs at least 3 distinct pump powers");
    }
    Slopes s;
    s.b_S = detail::fixed_intercept_slope(powers, n_S, dark_S);
    s.b_I = detail::fixed_intercept_slope(powers, n_I, dark_I);
    s.b_c = detail::fixed_intercept_slope(powers, n_c, dark_S * dark_I);
    return s;
}

struct CouplingEstimate {
    Estimate T_S;
    Estimate T_I;
    Estimate k;  // pairs per window per W
};

/// Solves k T_S eta_S = b_S, k T_I eta_I = b_I, k T_S T_I eta_S eta_I = b_c.
/// Errors are propagated to first order, treating the slopes as independent.
[[nodiscard]] inline CouplingEstimate derive_coupling(Estimate b_S, Estimate b_I, Estimate b_c, double eta_S,
                                                      double eta_I) {
    detail::require(b_S.value > 0.0 && b_I.value > 0.0 && b_c.value > 0.0, "slopes must be > 0");
    detail::require(eta_S > 0.0 && eta_I > 0.0, "detector efficiencies must be > 0");
    const double rs = b_S.std_error / b_S.value;
    const double ri = b_I.std_error / b_I.value;
    const double rc = b_c.std_error / b_c.value;

    CouplingEstimate out;
    out.T_S.value = b_c.value / (eta_S * b_I.value);
    out.T_I.value = b_c.value / (eta_I * b_S.value);
    out.k.value = b_S.value * b_I.value / b_c.value;
    out.T_S.std_error = out.T_S.value * std::hypot(rc, ri);
    out.T_I.std_error = out.T_I.value * std::hypot(rc, rs);
    out.k.std_error = out.k.value * std::sqrt(rs * rs + ri * ri + rc * rc);
    return out;
}

struct TransmissionCaps {
    std::optional<double> t_S;
    std::optional<double> t_I;
};

struct Bounds {
    Interval f_S;
    Interval f_I;
    Interval t_S;
    Interval t_I;
    Interval noise_S;  // added signal noise mean / mu
    Interval noise_I;
};

inline constexpr std::size_t kNoiseBoundGrid = 200;

/// Feasible ranges of the split between pair-preserving transmission t and
/// pair-breaking loss f, given T_S = t_S (1 - f_I) and T_I = t_I (1 - f_S).
[[nodiscard]] inline Bounds derive_bounds(double T_S, double T_I, TransmissionCaps caps = {}) {
    detail::require(T_S > 0.0 && T_S <= 1.0 && T_I > 0.0 && T_I <= 1.0, "T_S and T_I must be in (0, 1]");
    const double cap_S = caps.t_S.value_or(1.0);
    const double cap_I = caps.t_I.value_or(1.0);
    if (cap_S < T_S || cap_I < T_I || cap_S > 1.0 || cap_I > 1.0) {
        throw InconsistentBounds("transmission cap below the estimated transmission");
    }
    Bounds b;
    b.t_S = {T_S, cap_S};
    b.t_I = {T_I, cap_I};
    b.f_S = {0.0, 1.0 - T_I / cap_I};
    b.f_I = {0.0, 1.0 - T_S / cap_S};

    const double inf = std::numeric_limits<double>::infinity();
    if (b.f_S.hi + b.f_I.hi >= 1.0) {
        b.noise_S = {0.0, inf};
        b.noise_I = {0.0, inf};
        return b;
    }
    // With t_S = T_S / (1 - f_I) the added noise is T_S f_S f_I / (1 - f_S - f_I),
    // and symmetrically for the idler.
    double best_S = 0.0;
    double best_I = 0.0;
    const auto steps = static_cast<double>(kNoiseBoundGrid - 1);
    for (std::size_t i = 0; i < kNoiseBoundGrid; ++i) {
        const double f_S = b.f_S.hi * static_cast<double>(i) / steps;
        for (std::size_t j = 0; j < kNoiseBoundGrid; ++j) {
            const double f_I = b.f_I.hi * static_cast<double>(j) / steps;
            const double shared = f_S * f_I / (1.0 - f_S - f_I);
            best_S = std::max(best_S, T_S * shared);
            best_I = std::max(best_I, T_I * shared);
        }
    }
    b.noise_S = {0.0, best_S};
    b.noise_I = {0.0, best_I};
    return b;
}

struct EstimatedParams {
    Slopes slopes;
    CouplingEstimate coupling;
    Bounds bounds;
};

[[nodiscard]] inline EstimatedParams estimate(std::span<const RateMeasurement> data, double dark_S, double dark_I,
                                              double eta_S, double eta_I, TransmissionCaps caps = {}) {
    EstimatedParams p;
    p.slopes = fit_slopes(data, dark_S, dark_I);
    p.coupling = derive_coupling(p.slopes.b_S, p.slopes.b_I, p.slopes.b_c, eta_S, eta_I);
    p.bounds = derive_bounds(std::min(p.coupling.T_S.value, 1.0), std::min(p.coupling.T_I.value, 1.0), caps);
    return p;
}

}  // namespace herald
