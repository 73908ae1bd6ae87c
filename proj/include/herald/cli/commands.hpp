#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "herald/metrics.hpp"
#include "herald/parallel.hpp"
#include "herald/param_estimation.hpp"
#include "herald/qkd.hpp"
#include "herald/source_model.hpp"
#include "herald/validation.hpp"
#include "herald/cli/config.hpp"
#include "herald/cli/table.hpp"

namespace herald::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitValidationFailed = 1,
    kExitConfig = 2,
    kExitNumerical = 3,
    kExitInsecure = 4,
};

namespace detail {

inline Sweep require_sweep(const RunConfig& cfg, const std::string& axis) {
    auto sweep = cfg.sweep();
    if (!sweep) {
        throw ConfigError("this command needs a sweep over " + axis);
    }
    if (sweep->axis != axis) {
        throw ConfigError("sweep.axis must be " + axis);
    }
    return *sweep;
}

/// Evaluates one row per sweep value in parallel, keeping sweep order.
template <class RowFn>
std::vector<std::vector<Cell>> sweep_rows(const RunConfig& cfg, const Sweep& sweep, unsigned threads, RowFn&& row) {
    std::vector<std::vector<Cell>> rows(sweep.values.size());
    parallel_for(
        sweep.values.size(), [&](std::size_t i) { rows[i] = row(cfg.with(sweep.axis, sweep.values[i]), sweep.values[i]); },
        threads);
    return rows;
}

inline PhotonNumberDistribution distribution_of(const RunConfig& cfg) {
    return cfg.factory()(cfg.source().mu);
}

inline std::string short_axis(const std::string& axis) {
    const auto dot = axis.rfind('.');
    return dot == std::string::npos ? axis : axis.substr(dot + 1);
}

}  // namespace detail

/// mu,p_post,p_coinc,p_vac,c_multi,fano over a source.mu sweep.
[[nodiscard]] inline Table cmd_source_metrics(const RunConfig& cfg, unsigned threads = default_thread_count()) {
    const auto sweep = detail::require_sweep(cfg, "source.mu");
    Table t{{"mu", "p_post", "p_coinc", "p_vac", "c_multi", "fano"}, {}};
    t.rows = detail::sweep_rows(cfg, sweep, threads, [](const RunConfig& point, double mu) {
        const auto m = compute_metrics(detail::distribution_of(point));
        return std::vector<Cell>{mu, m.p_post, m.p_coinc, m.p_vac, m.c_multi, m.fano};
    });
    return t;
}

/// n,p_n for the configured source, or <axis>,n,p_n across a sweep.
[[nodiscard]] inline Table cmd_distribution(const RunConfig& cfg, unsigned threads = default_thread_count()) {
    const auto sweep = cfg.sweep();
    Table t;
    if (!sweep) {
        t.header = {"n", "p_n"};
        const auto dist = detail::distribution_of(cfg);
        for (std::size_t n = 0; n < dist.probs.size(); ++n) {
            t.rows.push_back({static_cast<std::int64_t>(n), dist.probs[n]});
        }
        return t;
    }
    t.header = {detail::short_axis(sweep->axis), "n", "p_n"};
    std::vector<PhotonNumberDistribution> dists(sweep->values.size());
    parallel_for(
        sweep->values.size(),
        [&](std::size_t i) { dists[i] = detail::distribution_of(cfg.with(sweep->axis, sweep->values[i])); }, threads);
    for (std::size_t i = 0; i < dists.size(); ++i) {
        for (std::size_t n = 0; n < dists[i].probs.size(); ++n) {
            t.rows.push_back({sweep->values[i], static_cast<std::int64_t>(n), dists[i].probs[n]});
        }
    }
    return t;
}

/// theta,fano,p_post over a coupling.theta sweep.
[[nodiscard]] inline Table cmd_fano_vs_theta(const RunConfig& cfg, unsigned threads = default_thread_count()) {
    const auto sweep = detail::require_sweep(cfg, "coupling.theta");
    Table t{{"theta", "fano", "p_post"}, {}};
    t.rows = detail::sweep_rows(cfg, sweep, threads, [](const RunConfig& point, double theta) {
        const auto dist = detail::distribution_of(point);
        return std::vector<Cell>{theta, fano_factor(dist), dist.r};
    });
    return t;
}

/// mu,G at the configured link length over a source.mu sweep.
[[nodiscard]] inline Table cmd_gain_sweep(const RunConfig& cfg, unsigned threads = default_thread_count()) {
    const auto sweep = detail::require_sweep(cfg, "source.mu");
    const auto link = cfg.link();
    Table t{{"mu", "G"}, {}};
    t.rows = detail::sweep_rows(cfg, sweep, threads, [&](const RunConfig& point, double mu) {
        return std::vector<Cell>{mu, gain(detail::distribution_of(point), link).G};
    });
    return t;
}

/// Optimized gain and its breakdown over a link.L_km sweep.
[[nodiscard]] inline Table cmd_optimize(const RunConfig& cfg, unsigned threads = default_thread_count()) {
    const auto sweep = detail::require_sweep(cfg, "link.L_km");
    const auto make = cfg.factory();
    const auto range = cfg.mu_range();
    Table t{{"L_km", "mu_opt", "G_opt", "e", "c_EC", "c_PA", "p_multi", "p_exp", "secure"}, {}};
    t.rows = detail::sweep_rows(cfg, sweep, threads, [&](const RunConfig& point, double km) {
        const auto opt = optimize_mu(make, point.link(), range);
        const auto& b = opt.breakdown;
        return std::vector<Cell>{km, opt.mu, b.G, b.e, b.c_EC, b.c_PA, b.p_multi, b.p_exp, b.secure};
    });
    return t;
}

/// theta,L_max_km,G_rel, optionally over a coupling.theta sweep. G_rel compares
/// the configured detector count against a single detector at zero length.
/// Sweeps over link.L_km or source.mu are ignored since both are solved for.
[[nodiscard]] inline Table cmd_max_distance(const RunConfig& cfg, unsigned threads = default_thread_count()) {
    auto sweep = cfg.sweep();
    if (sweep && (sweep->axis == "link.L_km" || sweep->axis == "source.mu")) {
        sweep.reset();
    }
    if (sweep && sweep->axis != "coupling.theta") {
        throw ConfigError("sweep.axis must be coupling.theta");
    }
    if (!sweep) {
        sweep = Sweep{"", {cfg.coupling().T_S}};
    }
    const auto range = cfg.mu_range();
    Table t{{"theta", "L_max_km", "G_rel"}, {}};
    std::vector<std::vector<Cell>> rows(sweep->values.size());
    parallel_for(
        sweep->values.size(),
        [&](std::size_t i) {
            const double theta = sweep->values[i];
            const auto point = sweep->axis.empty() ? cfg : cfg.with(sweep->axis, theta);
            const auto make = point.factory();
            const double l_max = max_distance(make, point.link(), range);
            double g_rel = std::numeric_limits<double>::quiet_NaN();
            if (point.source_kind() == SourceKind::Heralded) {
                const auto setup = point.setup();
                auto single = HeraldSetup::symmetric(1, setup.detectors.front());
                const auto baseline = heralded_factory(point.source(), point.coupling(), single);
                g_rel = relative_gain_improvement(make, baseline, point.link().at_length(0.0), range);
            }
            rows[i] = {theta, l_max, g_rel};
        },
        threads);
    t.rows = std::move(rows);
    return t;
}

/// Reads power_W,n_S,n_I,n_c rows; the header line is required.
[[nodiscard]] inline std::vector<RateMeasurement> read_measurements(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ConfigError("measurement CSV is empty");
    }
    const auto header = herald::cli::detail::split_list(line);
    const std::vector<std::string> expected = {"power_W", "n_S", "n_I", "n_c"};
    if (header != expected) {
        throw ConfigError("measurement CSV header must be power_W,n_S,n_I,n_c");
    }
    std::vector<RateMeasurement> data;
    while (std::getline(in, line)) {
        if (herald::cli::detail::trim(line).empty()) {
            continue;
        }
        const auto f = herald::cli::detail::split_list(line);
        if (f.size() != 4) {
            throw ConfigError("measurement CSV rows need 4 fields");
        }
        data.push_back({herald::cli::detail::parse_double("power_W", f[0]),
                        herald::cli::detail::parse_double("n_S", f[1]),
                        herald::cli::detail::parse_double("n_I", f[2]),
                        herald::cli::detail::parse_double("n_c", f[3])});
    }
    return data;
}

[[nodiscard]] inline nlohmann::ordered_json to_json(const EstimatedParams& p) {
    auto est = [](const Estimate& e) { return nlohmann::ordered_json{{"value", e.value}, {"std_error", e.std_error}}; };
    auto bound = [](double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr); };
    auto interval = [&](const Interval& i) { return nlohmann::ordered_json{{"lo", bound(i.lo)}, {"hi", bound(i.hi)}}; };
    nlohmann::ordered_json j;
    j["b_S"] = est(p.slopes.b_S);
    j["b_I"] = est(p.slopes.b_I);
    j["b_c"] = est(p.slopes.b_c);
    j["T_S"] = est(p.coupling.T_S);
    j["T_I"] = est(p.coupling.T_I);
    j["k"] = est(p.coupling.k);
    j["f_S"] = interval(p.bounds.f_S);
    j["f_I"] = interval(p.bounds.f_I);
    j["t_S"] = interval(p.bounds.t_S);
    j["t_I"] = interval(p.bounds.t_I);
    j["noise_S_over_mu"] = interval(p.bounds.noise_S);
    j["noise_I_over_mu"] = interval(p.bounds.noise_I);
    return j;
}

[[nodiscard]] inline EstimatedParams run_estimate(const RunConfig& cfg, std::istream& csv) {
    const auto data = read_measurements(csv);
    TransmissionCaps caps;
    if (cfg.has("estimate.t_cap_S")) {
        caps.t_S = cfg.get_double("estimate.t_cap_S", 1.0);
    }
    if (cfg.has("estimate.t_cap_I")) {
        caps.t_I = cfg.get_double("estimate.t_cap_I", 1.0);
    }
    if (!cfg.has("estimate.eta_S") || !cfg.has("estimate.eta_I")) {
        throw ConfigError("estimate needs estimate.eta_S and estimate.eta_I");
    }
    return estimate(data, cfg.get_double("estimate.dark_S", 0.0), cfg.get_double("estimate.dark_I", 0.0),
                    cfg.get_double("estimate.eta_S", 1.0), cfg.get_double("estimate.eta_I", 1.0), caps);
}

[[nodiscard]] inline nlohmann::ordered_json cmd_estimate(const RunConfig& cfg) {
    const auto path = cfg.get("estimate.input");
    if (!path) {
        throw ConfigError("estimate needs estimate.input");
    }
    std::ifstream in(*path);
    if (!in) {
        throw ConfigError("cannot open " + *path);
    }
    return to_json(run_estimate(cfg, in));
}

inline constexpr double kDirectTolerance = 1e-10;
inline constexpr double kMaxZ = 4.0;

struct ValidationReport {
    Table table;
    bool passed = true;
};

/// Closed form against direct summation and Monte Carlo on the corner grid.
[[nodiscard]] inline ValidationReport cmd_validate(const RunConfig& cfg, std::uint64_t seed,
                                                   unsigned threads = default_thread_count()) {
    const double mu = cfg.get_double("validate.mu", 1.0);
    const auto n_outputs = cfg.get_int("validate.N", 4);
    const auto trials = cfg.get_int("validate.trials", 1000000);
    if (n_outputs < 1 || trials < 0 || !(mu > 0.0)) {
        throw ConfigError("validate needs mu > 0, N >= 1 and trials >= 0");
    }
    const auto grid = corner_grid();
    std::vector<CornerCheck> checks(grid.size());
    // Corners run one after another; the Monte Carlo inside each is parallel.
    for (std::size_t i = 0; i < grid.size(); ++i) {
        checks[i] = check_corner(grid[i], mu, static_cast<std::size_t>(n_outputs), static_cast<std::uint64_t>(trials),
                                 seed + i, threads);
    }
    ValidationReport report;
    report.table.header = {"statistics", "eta",          "dark_rate",    "theta",    "add_fraction",
                           "max_rel_direct", "mass_outside", "max_abs_z_mc", "pass"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& c = grid[i];
        const auto& r = checks[i];
        const bool ok = r.direct.max_relative <= kDirectTolerance && r.mc_max_z <= kMaxZ;
        report.passed = report.passed && ok;
        report.table.rows.push_back({std::string(c.statistics == PairStatistics::Poisson ? "poisson" : "bose-einstein"), c.eta,
                                     c.dark_rate, c.theta, c.add_fraction, r.direct.max_relative,
                                     r.direct.mass_outside, r.mc_max_z, ok});
    }
    return report;
}

}  // namespace herald::cli
