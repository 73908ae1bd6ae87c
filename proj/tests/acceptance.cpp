// One PASS/FAIL line per acceptance criterion. `--only <name>` runs one.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "herald/metrics.hpp"
#include "herald/param_estimation.hpp"
#include "herald/qkd.hpp"
#include "herald/source_model.hpp"
#include "herald/validation.hpp"

using namespace herald;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const char* fmt, auto... args) {
        char buf[256];
        std::snprintf(buf, sizeof buf, fmt, args...);
        if (!detail.empty()) {
            detail += "; ";
        }
        detail += buf;
        if (!ok) {
            detail += " [x]";
        }
        pass = pass && ok;
    }
};

class Stopwatch {
  public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

QKDLink telecom_link() {
    QKDLink l;
    l.T_alice = 0.79;
    l.alpha_db_per_km = 0.2;
    l.intrinsic_error = 0.01;
    l.eta_bob = 0.18;
    l.dark_bob = 2e-5;
    return l;
}

DistributionFactory device(double theta, double eta, double dark_rate, std::size_t n, double add = 0.0) {
    return heralded_factory(PairSourceConfig{}, CouplingConfig::symmetric(theta, NoiseLevel::fraction_of_mu(add)),
                            HeraldSetup::symmetric(n, DetectorConfig{eta, dark_rate}));
}

// 1e-7 per 1 ns window is 100 counts/s; 2e-8 is 20 counts/s.
constexpr double kRealisticDark = 100.0;
constexpr double kBestDark = 20.0;

Outcome ideal_max_distance() {
    Outcome o;
    Stopwatch sw;
    for (std::size_t n : {1u, 10u}) {
        const double l = max_distance(device(1.0, 1.0, 0.0, n), telecom_link());
        o.check(std::abs(l - 161.0) <= 3.0, "N=%zu L_max=%.2f km (161 +- 3)", n, l);
    }
    const double t = sw.seconds();
    o.check(t < 60.0, "%.2f s (< 60)", t);
    return o;
}

Outcome realistic_max_distance() {
    Outcome o;
    std::vector<double> lengths;
    for (std::size_t n : {1u, 4u, 10u}) {
        const double l = max_distance(device(0.2, 0.55, kRealisticDark, n), telecom_link());
        o.check(std::abs(l - 120.0) <= 5.0, "N=%zu L_max=%.2f km (120 +- 5)", n, l);
        lengths.push_back(l);
    }
    const double spread = *std::ranges::max_element(lengths) - *std::ranges::min_element(lengths);
    o.check(spread <= 1.0, "spread over N=%.2f km (<= 1)", spread);
    return o;
}

Outcome best_today_max_distance() {
    Outcome o;
    for (std::size_t n : {1u, 10u}) {
        const double l = max_distance(device(0.6, 0.7, kBestDark, n), telecom_link());
        o.check(std::abs(l - 148.0) <= 4.0, "N=%zu L_max=%.2f km (148 +- 4)", n, l);
    }
    const double best = optimize_mu(device(0.6, 0.7, kBestDark, 10), telecom_link()).breakdown.G;
    const double realistic = optimize_mu(device(0.2, 0.55, kRealisticDark, 1), telecom_link()).breakdown.G;
    const double ratio = best / realistic;
    o.check(ratio >= 2.0 && ratio <= 4.0, "G_opt(L=0) ratio=%.3f ([2, 4])", ratio);
    return o;
}

Outcome coupling_estimate() {
    Outcome o;
    Stopwatch sw;
    const auto c = derive_coupling({5.13e-5, 0.05e-5}, {5.50e-5, 0.04e-5}, {4.86e-6, 0.05e-6}, 0.474, 0.586);
    o.check(std::abs(c.T_S.value - 0.186) <= 0.0005, "T_S=%.5f", c.T_S.value);
    o.check(std::abs(c.T_I.value - 0.162) <= 0.0005, "T_I=%.5f", c.T_I.value);
    o.check(std::abs(c.k.value - 5.81e-4) <= 1e-6, "k=%.4e", c.k.value);
    auto within = [](double got, double quoted) { return std::abs(got - quoted) <= 0.3 * quoted; };
    o.check(within(c.T_S.std_error, 0.002), "sigma_T_S=%.5f", c.T_S.std_error);
    o.check(within(c.T_I.std_error, 0.002), "sigma_T_I=%.5f", c.T_I.std_error);
    o.check(within(c.k.std_error, 0.09e-4), "sigma_k=%.3e", c.k.std_error);
    const double t = sw.seconds();
    o.check(t < 1.0, "%.4f s (< 1)", t);
    return o;
}

/// Agreement with a printed value to the number of decimals it was printed with.
bool as_printed(double value, double printed, int decimals) {
    return std::abs(value - printed) <= 0.5 * std::pow(10.0, -decimals) + 1e-12;
}

Outcome coupling_bounds() {
    Outcome o;
    const auto c = derive_coupling({5.13e-5, 0.05e-5}, {5.50e-5, 0.04e-5}, {4.86e-6, 0.05e-6}, 0.474, 0.586);
    const auto open = derive_bounds(c.T_S.value, c.T_I.value);
    o.check(as_printed(open.f_S.hi, 0.838, 3), "f_S<%.4f (0.838)", open.f_S.hi);
    o.check(as_printed(open.f_I.hi, 0.814, 3), "f_I<%.4f (0.814)", open.f_I.hi);
    const auto capped = derive_bounds(c.T_S.value, c.T_I.value, {0.25, 0.25});
    o.check(as_printed(capped.f_S.hi, 0.35, 2), "capped f_S<%.4f (0.35)", capped.f_S.hi);
    o.check(as_printed(capped.f_I.hi, 0.25, 2), "capped f_I<%.4f (0.25)", capped.f_I.hi);
    o.check(as_printed(capped.noise_S.hi, 0.041, 3), "noise_S<%.4f mu (0.041)", capped.noise_S.hi);
    o.check(as_printed(capped.noise_I.hi, 0.036, 3), "noise_I<%.4f mu (0.036)", capped.noise_I.hi);
    return o;
}

Outcome ideal_case_properties() {
    Outcome o;
    double worst_vac = 0.0;
    double worst_coinc = 0.0;
    double worst_post = 0.0;
    for (int e = -6; e <= 1; ++e) {
        const double mu = std::pow(10.0, e);
        for (std::size_t n : {1u, 10u, 1000u}) {
            const auto m = compute_metrics(device(1.0, 1.0, 0.0, n)(mu));
            worst_vac = std::max(worst_vac, m.p_vac);
            worst_coinc = std::max(worst_coinc, std::abs(m.p_coinc - 1.0));
            if (n == 1) {
                const double expected = -std::expm1(-mu);
                worst_post = std::max(worst_post, std::abs(m.p_post - expected) / expected);
            }
        }
    }
    o.check(worst_vac <= 1e-12, "max p_vac=%.2e", worst_vac);
    o.check(worst_coinc <= 1e-12, "max |p_coinc-1|=%.2e", worst_coinc);
    o.check(worst_post <= 1e-12, "N=1 p_post rel err=%.2e", worst_post);

    // Maximum of p_post over mu for N=1000 by golden section on [0.1, 10].
    const auto make = device(1.0, 1.0, 0.0, 1000);
    auto p_post = [&](double mu) { return make(mu).r; };
    double a = 0.1;
    double b = 10.0;
    const double g = std::numbers::phi - 1.0;
    while (b - a > 1e-9) {
        const double x1 = b - g * (b - a);
        const double x2 = a + g * (b - a);
        if (p_post(x1) < p_post(x2)) {
            a = x1;
        } else {
            b = x2;
        }
    }
    const double mu_star = 0.5 * (a + b);
    const double peak = p_post(mu_star);
    const double inv_e = std::exp(-1.0);
    o.check(mu_star >= 0.8 && mu_star <= 1.2, "N=1000 argmax mu=%.4f ([0.8, 1.2])", mu_star);
    o.check(peak >= 0.9 * inv_e && peak <= inv_e, "max p_post=%.6f ([%.6f, %.6f])", peak, 0.9 * inv_e, inv_e);
    return o;
}

Outcome fano_region() {
    Outcome o;
    double worst = 0.0;
    double worst_mu = 0.0;
    std::size_t worst_n = 0;
    for (double mu : {1e-4, 1e-3, 1e-2, 1e-1}) {
        for (std::size_t n : {1u, 2u, 4u, 8u}) {
            const double f = compute_metrics(device(1.0, 0.55, kRealisticDark, n)(mu)).fano;
            if (f > worst) {
                worst = f;
                worst_mu = mu;
                worst_n = n;
            }
        }
    }
    o.check(worst < 0.05, "max F=%.4f at mu=%g N=%zu (< 0.05)", worst, worst_mu, worst_n);
    return o;
}

Outcome oracle_equivalence() {
    Outcome o;
    Stopwatch sw;
    double worst_direct = 0.0;
    double worst_z = 0.0;
    double outside = 0.0;
    const auto grid = corner_grid();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto r = check_corner(grid[i], 1.0, 4, 1000000, 1 + i);
        worst_direct = std::max(worst_direct, r.direct.max_relative);
        worst_z = std::max(worst_z, r.mc_max_z);
        outside = std::max(outside, r.direct.mass_outside);
    }
    o.check(worst_direct <= 1e-10, "%zu corners, max rel direct=%.2e", grid.size(), worst_direct);
    o.check(outside <= 1e-10, "mass beyond support=%.1e", outside);
    o.check(worst_z <= 4.0, "max |z| MC 1e6=%.2f", worst_z);
    const double t = sw.seconds();
    o.check(t < 300.0, "%.1f s (< 300)", t);
    return o;
}

Outcome gain_improvement() {
    Outcome o;
    const auto link = telecom_link();
    auto g_rel = [&](double theta) {
        return relative_gain_improvement(device(theta, 0.55, kRealisticDark, 2, 0.04),
                                         device(theta, 0.55, kRealisticDark, 1, 0.04), link);
    };
    const double high = g_rel(0.8);
    const double low = g_rel(0.2);
    o.check(high > 0.10, "theta=0.8 G_rel=%.4f (> 0.10)", high);
    o.check(low <= 0.02, "theta=0.2 G_rel=%.4f (<= 0.02)", low);
    return o;
}

Outcome coherent_baseline() {
    Outcome o;
    const double coherent = max_distance(coherent_factory(), telecom_link());
    const double heralded = max_distance(device(0.2, 0.55, kRealisticDark, 1), telecom_link());
    o.check(coherent < heralded, "coherent %.2f km < heralded %.2f km", coherent, heralded);
    o.check(coherent >= 15.0 && coherent <= 35.0, "coherent L_max=%.2f km ([15, 35])", coherent);
    return o;
}

struct Criterion {
    std::string_view name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {"ideal_max_distance", ideal_max_distance},
        {"realistic_max_distance", realistic_max_distance},
        {"best_today_max_distance", best_today_max_distance},
        {"coupling_estimate", coupling_estimate},
        {"coupling_bounds", coupling_bounds},
        {"ideal_case_properties", ideal_case_properties},
        {"fano_region", fano_region},
        {"oracle_equivalence", oracle_equivalence},
        {"gain_improvement", gain_improvement},
        {"coherent_baseline", coherent_baseline},
    };
    std::string_view only;
    for (int i = 1; i < argc; ++i) {
        if (std::string_view(argv[i]) == "--only" && i + 1 < argc) {
            only = argv[++i];
        } else {
            std::fprintf(stderr, "usage: acceptance [--only <criterion>]\n");
            return 2;
        }
    }
    bool all = true;
    bool ran = false;
    for (const auto& c : criteria) {
        if (!only.empty() && c.name != only) {
            continue;
        }
        ran = true;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s %.*s: %s\n", o.pass ? "PASS" : "FAIL", static_cast<int>(c.name.size()), c.name.data(),
                    o.detail.c_str());
        all = all && o.pass;
    }
    if (!ran) {
        std::fprintf(stderr, "unknown criterion %.*s\n", static_cast<int>(only.size()), only.data());
        return 2;
    }
    return all ? 0 : 1;
}
