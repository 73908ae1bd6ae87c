#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "herald/param_estimation.hpp"

using namespace herald;

namespace {

struct TrueSlopes {
    double b_S;
    double b_I;
    double b_c;
};

/// Rates at powers 0, 0.02, ..., 0.42 W with optional Gaussian scatter on each
/// rate. Noisy sweeps skip zero power so no rate goes negative.
std::vector<RateMeasurement> synthesize(TrueSlopes b, double dark_S, double dark_I, double sigma_single = 0.0,
                                        double sigma_coinc = 0.0, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<RateMeasurement> data;
    const bool noisy = sigma_single > 0.0 || sigma_coinc > 0.0;
    for (int i = noisy ? 1 : 0; i <= 21; ++i) {
        const double p = 0.02 * i;
        RateMeasurement m;
        m.power = p;
        m.n_S = dark_S + b.b_S * p + sigma_single * gauss(rng);
        m.n_I = dark_I + b.b_I * p + sigma_single * gauss(rng);
        m.n_c = dark_S * dark_I + b.b_c * p + sigma_coinc * gauss(rng);
        data.push_back(m);
    }
    return data;
}

constexpr TrueSlopes kMeasured{5.13e-5, 5.50e-5, 4.86e-6};

}  // namespace

TEST(FitSlopes, ExactLinearData) {
    const auto data = synthesize({3e-4, 2e-4, 7e-5}, 0.0, 0.0);
    const auto s = fit_slopes(data, 0.0, 0.0);
    EXPECT_NEAR(s.b_S.value, 3e-4, 1e-12 * 3e-4);
    EXPECT_NEAR(s.b_I.value, 2e-4, 1e-12 * 2e-4);
    EXPECT_NEAR(s.b_c.value, 7e-5, 1e-12 * 7e-5);
    EXPECT_LT(s.b_S.std_error, 1e-12 * 3e-4);
}

TEST(FitSlopes, DarkInterceptsAreSubtracted) {
    const auto data = synthesize({3e-4, 2e-4, 7e-5}, 1e-4, 3e-4);
    const auto s = fit_slopes(data, 1e-4, 3e-4);
    EXPECT_NEAR(s.b_S.value, 3e-4, 1e-11 * 3e-4);
    EXPECT_NEAR(s.b_I.value, 2e-4, 1e-11 * 2e-4);
    EXPECT_NEAR(s.b_c.value, 7e-5, 1e-11 * 7e-5);
}

TEST(FitSlopes, NoisyDataWithinFourSigma) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto data = synthesize({3e-4, 2e-4, 7e-5}, 1e-6, 1e-6, 5e-7, 1e-7, seed);
        const auto s = fit_slopes(data, 1e-6, 1e-6);
        EXPECT_LT(std::abs(s.b_S.value - 3e-4), 4.0 * s.b_S.std_error) << seed;
        EXPECT_LT(std::abs(s.b_I.value - 2e-4), 4.0 * s.b_I.std_error) << seed;
        EXPECT_LT(std::abs(s.b_c.value - 7e-5), 4.0 * s.b_c.std_error) << seed;
    }
}

TEST(FitSlopes, StandardErrorMatchesScatter) {
    // Powers 0.02..0.42 W give sum x^2 = 1.3244, so sigma_b = sigma_y / 1.1508.
    double mean = 0.0;
    const int repeats = 200;
    for (int seed = 0; seed < repeats; ++seed) {
        mean += fit_slopes(synthesize(kMeasured, 0.0, 0.0, 1e-7, 1e-8, seed), 0.0, 0.0).b_S.std_error;
    }
    mean /= repeats;
    EXPECT_NEAR(mean, 1e-7 / std::sqrt(1.3244), 0.05 * 1e-7 / std::sqrt(1.3244));
}

TEST(FitSlopes, MeasuredScaleRecoveredWithinQuotedErrors) {
    // Scatter sized so the fit uncertainty is a third of the quoted ones.
    const auto data = synthesize(kMeasured, 1e-7, 1e-7, 1.9e-7, 1.9e-8);
    const auto s = fit_slopes(data, 1e-7, 1e-7);
    EXPECT_NEAR(s.b_S.value, 5.13e-5, 0.05e-5);
    EXPECT_NEAR(s.b_I.value, 5.50e-5, 0.04e-5);
    EXPECT_NEAR(s.b_c.value, 4.86e-6, 0.05e-6);
}

TEST(FitSlopes, RejectsDegenerateDesigns) {
    std::vector<RateMeasurement> same(5, RateMeasurement{0.1, 1e-5, 1e-5, 1e-6});
    EXPECT_THROW((void)fit_slopes(same, 0.0, 0.0), FitError);
    auto two = same;
    two[0].power = 0.2;
    EXPECT_THROW((void)fit_slopes(two, 0.0, 0.0), FitError);
    EXPECT_THROW((void)fit_slopes({}, 0.0, 0.0), FitError);
    two[1].power = 0.3;
    EXPECT_NO_THROW((void)fit_slopes(two, 0.0, 0.0));
    two[1].n_S = 1.5;
    EXPECT_THROW((void)fit_slopes(two, 0.0, 0.0), InvalidParameter);
}

TEST(DeriveCoupling, MeasuredSlopes) {
    const auto c = derive_coupling({5.13e-5, 0.05e-5}, {5.50e-5, 0.04e-5}, {4.86e-6, 0.05e-6}, 0.474, 0.586);
    EXPECT_NEAR(c.T_S.value, 4.86e-6 / (0.474 * 5.50e-5), 1e-15);
    EXPECT_NEAR(c.T_S.value, 0.186, 0.0005);
    EXPECT_NEAR(c.T_I.value, 0.162, 0.0005);
    EXPECT_NEAR(c.k.value, 5.81e-4, 1e-6);
    EXPECT_NEAR(c.T_S.std_error, 0.002, 0.3 * 0.002);
    EXPECT_NEAR(c.T_I.std_error, 0.002, 0.3 * 0.002);
    EXPECT_NEAR(c.k.std_error, 0.09e-4, 0.3 * 0.09e-4);
}

TEST(DeriveCoupling, PerfectHeraldingAndSymmetry) {
    const auto perfect = derive_coupling({2e-4, 0}, {3e-4, 0}, {0.6 * 3e-4, 0}, 0.6, 0.8);
    EXPECT_NEAR(perfect.T_S.value, 1.0, 1e-15);
    const auto sym = derive_coupling({2e-4, 1e-6}, {2e-4, 1e-6}, {1e-5, 1e-7}, 0.7, 0.7);
    EXPECT_EQ(sym.T_S.value, sym.T_I.value);
    EXPECT_EQ(sym.T_S.std_error, sym.T_I.std_error);
}

TEST(DeriveCoupling, RejectsNonPositiveInputs) {
    EXPECT_THROW((void)derive_coupling({0, 0}, {1e-4, 0}, {1e-5, 0}, 0.5, 0.5), InvalidParameter);
    EXPECT_THROW((void)derive_coupling({1e-4, 0}, {1e-4, 0}, {0, 0}, 0.5, 0.5), InvalidParameter);
    EXPECT_THROW((void)derive_coupling({1e-4, 0}, {1e-4, 0}, {1e-5, 0}, 0.0, 0.5), InvalidParameter);
}

TEST(DeriveCoupling, ErrorPropagationMatchesFiniteDifferences) {
    const Estimate b_S{5.13e-5, 0.05e-5};
    const Estimate b_I{5.50e-5, 0.04e-5};
    const Estimate b_c{4.86e-6, 0.05e-6};
    const auto c = derive_coupling(b_S, b_I, b_c, 0.474, 0.586);
    auto k_of = [](double s, double i, double cc) { return s * i / cc; };
    const double h = 1e-7;
    const double dS = (k_of(b_S.value * (1 + h), b_I.value, b_c.value) - c.k.value) / (b_S.value * h);
    const double dI = (k_of(b_S.value, b_I.value * (1 + h), b_c.value) - c.k.value) / (b_I.value * h);
    const double dC = (k_of(b_S.value, b_I.value, b_c.value * (1 + h)) - c.k.value) / (b_c.value * h);
    const double sigma = std::sqrt(std::pow(dS * b_S.std_error, 2) + std::pow(dI * b_I.std_error, 2) +
                                   std::pow(dC * b_c.std_error, 2));
    EXPECT_NEAR(c.k.std_error, sigma, 1e-5 * sigma);
}

TEST(Estimate, RoundTripRecoversInputs) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double k = unit(rng);
        const double T_S = unit(rng);
        const double T_I = unit(rng);
        const double eta_S = unit(rng);
        const double eta_I = unit(rng);
        const double d_S = 1e-6 * unit(rng);
        const double d_I = 1e-6 * unit(rng);
        // Scaled so every rate stays a probability at 0.42 W.
        const double scale = 1e-3;
        const TrueSlopes b{scale * k * T_S * eta_S, scale * k * T_I * eta_I, scale * k * T_S * T_I * eta_S * eta_I};
        const auto p = estimate(synthesize(b, d_S, d_I), d_S, d_I, eta_S, eta_I);
        EXPECT_NEAR(p.coupling.T_S.value, T_S, 1e-10 * T_S);
        EXPECT_NEAR(p.coupling.T_I.value, T_I, 1e-10 * T_I);
        EXPECT_NEAR(p.coupling.k.value, scale * k, 1e-10 * scale * k);
    }
}

TEST(Estimate, PropagatedErrorsScaleWithScatter) {
    const auto small = estimate(synthesize(kMeasured, 0.0, 0.0, 1e-10, 1e-11), 0.0, 0.0, 0.474, 0.586);
    const auto large = estimate(synthesize(kMeasured, 0.0, 0.0, 1e-9, 1e-10), 0.0, 0.0, 0.474, 0.586);
    EXPECT_NEAR(large.coupling.T_S.std_error / small.coupling.T_S.std_error, 10.0, 0.05);
    EXPECT_NEAR(large.coupling.T_I.std_error / small.coupling.T_I.std_error, 10.0, 0.05);
    EXPECT_NEAR(large.coupling.k.std_error / small.coupling.k.std_error, 10.0, 0.05);
}

TEST(DeriveBounds, DefaultRanges) {
    const auto b = derive_bounds(0.186, 0.162);
    EXPECT_NEAR(b.f_S.hi, 0.838, 1e-12);
    EXPECT_NEAR(b.f_I.hi, 0.814, 1e-12);
    EXPECT_EQ(b.f_S.lo, 0.0);
    EXPECT_EQ(b.t_S.lo, 0.186);
    EXPECT_EQ(b.t_S.hi, 1.0);
    // f_S + f_I may reach 1, where the added noise is unbounded.
    EXPECT_TRUE(std::isinf(b.noise_S.hi));
}

TEST(DeriveBounds, CappedTransmissions) {
    const auto b = derive_bounds(0.186, 0.162, {0.25, 0.25});
    EXPECT_NEAR(b.f_S.hi, 1.0 - 0.162 / 0.25, 1e-15);
    EXPECT_NEAR(b.f_I.hi, 1.0 - 0.186 / 0.25, 1e-15);
    EXPECT_NEAR(b.f_S.hi, 0.35, 0.005);
    EXPECT_NEAR(b.f_I.hi, 0.25, 0.01);
    EXPECT_EQ(b.t_S.hi, 0.25);
}

TEST(DeriveBounds, NoiseBoundSitsAtTheFarCorner) {
    const auto b = derive_bounds(0.186, 0.162, {0.25, 0.25});
    const double shared = b.f_S.hi * b.f_I.hi / (1.0 - b.f_S.hi - b.f_I.hi);
    EXPECT_NEAR(b.noise_S.hi, 0.186 * shared, 1e-15);
    EXPECT_NEAR(b.noise_I.hi, 0.162 * shared, 1e-15);
    // Same value written with t at its cap.
    EXPECT_NEAR(b.noise_S.hi, 0.25 * b.f_S.hi * b.f_I.hi * (1.0 - b.f_I.hi) / (1.0 - b.f_S.hi - b.f_I.hi), 1e-15);
}

TEST(DeriveBounds, InconsistentCaps) {
    EXPECT_THROW((void)derive_bounds(0.3, 0.2, {0.25, 0.25}), InconsistentBounds);
    EXPECT_THROW((void)derive_bounds(0.2, 0.3, {std::nullopt, 0.25}), InconsistentBounds);
    EXPECT_NO_THROW((void)derive_bounds(0.2, 0.3, {0.25, std::nullopt}));
    EXPECT_THROW((void)derive_bounds(0.0, 0.3), InvalidParameter);
}

TEST(DeriveBounds, ContainTheTruth) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> small(0.0, 0.1);
    std::uniform_real_distribution<double> t(0.1, 1.0);
    std::uniform_real_distribution<double> slack(1.0, 1.3);
    for (int trial = 0; trial < 500; ++trial) {
        const double f_S = small(rng);
        const double f_I = small(rng);
        const double t_S = t(rng);
        const double t_I = t(rng);
        const double T_S = t_S * (1.0 - f_I);
        const double T_I = t_I * (1.0 - f_S);
        const double noise_S = t_S * f_S * f_I * (1.0 - f_I) / (1.0 - f_S - f_I);
        const double noise_I = t_I * f_S * f_I * (1.0 - f_S) / (1.0 - f_S - f_I);
        const auto open = derive_bounds(T_S, T_I);
        EXPECT_TRUE(open.f_S.contains(f_S) && open.f_I.contains(f_I));
        EXPECT_TRUE(open.t_S.contains(t_S) && open.t_I.contains(t_I));
        const auto capped = derive_bounds(T_S, T_I, {std::min(1.0, t_S * slack(rng)), std::min(1.0, t_I * slack(rng))});
        EXPECT_TRUE(capped.f_S.contains(f_S) && capped.f_I.contains(f_I)) << trial;
        EXPECT_TRUE(capped.t_S.contains(t_S) && capped.t_I.contains(t_I)) << trial;
        if (std::isfinite(capped.noise_S.hi)) {
            EXPECT_LE(noise_S, capped.noise_S.hi * (1.0 + 1e-12)) << trial;
            EXPECT_LE(noise_I, capped.noise_I.hi * (1.0 + 1e-12)) << trial;
        }
    }
}
