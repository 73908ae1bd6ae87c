#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "herald/config.hpp"
#include "herald/error.hpp"
#include "herald/param_estimation.hpp"
#include "herald/qkd.hpp"
#include "herald/cli/table.hpp"

namespace herald::cli {

/// Malformed or unknown configuration input.
class ConfigError : public InvalidParameter {
  public:
    using InvalidParameter::InvalidParameter;
};

inline const std::set<std::string, std::less<>>& known_keys() {
    static const std::set<std::string, std::less<>> keys = {
        "source.kind",          "source.statistics",  "source.mu",          "source.tau",
        "coupling.theta",       "coupling.T_S",       "coupling.T_I",       "coupling.add_S",
        "coupling.add_I",       "coupling.add",       "coupling.unpaired_noise",
        "setup.N",              "setup.split",        "setup.eta",          "setup.dark_rate",
        "setup.trigger",        "link.T_alice",       "link.alpha_db_per_km",
        "link.L_km",            "link.l_bob_db",      "link.eta_bob",       "link.dark_bob",
        "link.c",               "optimize.mu_lo",     "optimize.mu_hi",     "sweep.axis",
        "sweep.from",           "sweep.to",           "sweep.points",       "sweep.spacing",
        "sweep.values",         "estimate.input",     "estimate.eta_S",     "estimate.eta_I",
        "estimate.dark_S",      "estimate.dark_I",    "estimate.t_cap_S",   "estimate.t_cap_I",
        "validate.mu",          "validate.N",         "validate.trials",    "validate.seed",
        "output.path",          "output.format",
    };
    return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto end = comma == std::string_view::npos ? s.size() : comma;
        items.push_back(trim(s.substr(start, end - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return items;
}

inline double parse_double(const std::string& key, std::string_view text) {
    double value = 0.0;
    const auto* begin = text.data();
    const auto* end = text.data() + text.size();
    if (!text.empty() && *begin == '+') {
        ++begin;
    }
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end || text.empty()) {
        throw ConfigError(key + ": expected a number, got '" + std::string(text) + "'");
    }
    return value;
}

inline std::int64_t parse_int(const std::string& key, std::string_view text) {
    std::int64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError(key + ": expected an integer, got '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace detail

enum class SourceKind { Heralded, Coherent };

struct Sweep {
    std::string axis;
    std::vector<double> values;
};

/// Flat dotted key/value configuration. Later assignments win.
class RunConfig {
  public:
    RunConfig() = default;

    /// Parses `key = value` lines; `#` starts a comment.
    static RunConfig parse(std::istream& in) {
        RunConfig cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) {
                line.erase(hash);
            }
            const auto text = detail::trim(line);
            if (text.empty()) {
                continue;
            }
            const auto eq = text.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
            }
            cfg.set(detail::trim(std::string_view(text).substr(0, eq)),
                    detail::trim(std::string_view(text).substr(eq + 1)));
        }
        return cfg;
    }

    static RunConfig parse_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    /// A relative estimate.input in the file is taken relative to the file.
    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open config file " + path);
        }
        auto cfg = parse(in);
        if (const auto input = cfg.get("estimate.input")) {
            const std::filesystem::path p(*input);
            if (p.is_relative()) {
                cfg.set("estimate.input", (std::filesystem::path(path).parent_path() / p).string());
            }
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) {
        if (!known_keys().contains(key)) {
            throw ConfigError("unknown key '" + key + "'");
        }
        values_[key] = value;
    }

    /// Applies a `key=value` override.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override must look like key=value: " + assignment);
        }
        set(detail::trim(std::string_view(assignment).substr(0, eq)),
            detail::trim(std::string_view(assignment).substr(eq + 1)));
    }

    [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }

    [[nodiscard]] std::optional<std::string> get(const std::string& key) const {
        if (auto it = values_.find(key); it != values_.end()) {
            return it->second;
        }
        return std::nullopt;
    }

    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const {
        return get(key).value_or(fallback);
    }

    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        const auto v = get(key);
        return v ? detail::parse_double(key, *v) : fallback;
    }

    [[nodiscard]] std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        const auto v = get(key);
        return v ? detail::parse_int(key, *v) : fallback;
    }

    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const {
        const auto v = get(key);
        if (!v) {
            return fallback;
        }
        if (*v == "true" || *v == "1" || *v == "yes") {
            return true;
        }
        if (*v == "false" || *v == "0" || *v == "no") {
            return false;
        }
        throw ConfigError(key + ": expected true or false");
    }

    [[nodiscard]] RunConfig with(const std::string& key, double value) const {
        auto copy = *this;
        copy.set(key, format_number(value));
        return copy;
    }

    [[nodiscard]] SourceKind source_kind() const {
        const auto kind = get_string("source.kind", "heralded");
        if (kind == "heralded") {
            return SourceKind::Heralded;
        }
        if (kind == "coherent") {
            return SourceKind::Coherent;
        }
        throw ConfigError("source.kind must be heralded or coherent");
    }

    [[nodiscard]] PairSourceConfig source() const {
        PairSourceConfig s;
        const auto stats = get_string("source.statistics", "poisson");
        if (stats == "poisson") {
            s.statistics = PairStatistics::Poisson;
        } else if (stats == "bose-einstein" || stats == "bose_einstein") {
            s.statistics = PairStatistics::BoseEinstein;
        } else {
            throw ConfigError("source.statistics must be poisson or bose-einstein");
        }
        s.mu = get_double("source.mu", 0.0);
        s.tau = get_double("source.tau", 1e-9);
        s.validate();
        return s;
    }

    [[nodiscard]] CouplingConfig coupling() const {
        CouplingConfig c;
        if (has("coupling.theta")) {
            if (has("coupling.T_S") || has("coupling.T_I")) {
                throw ConfigError("coupling.theta cannot be combined with coupling.T_S or coupling.T_I");
            }
            c.T_S = c.T_I = get_double("coupling.theta", 1.0);
        } else {
            c.T_S = get_double("coupling.T_S", 1.0);
            c.T_I = get_double("coupling.T_I", 1.0);
        }
        const auto shared = noise("coupling.add");
        c.added_S = has("coupling.add_S") ? noise("coupling.add_S") : shared;
        c.added_I = has("coupling.add_I") ? noise("coupling.add_I") : shared;
        c.unpaired_noise = get_bool("coupling.unpaired_noise", false);
        c.validate();
        return c;
    }

    [[nodiscard]] HeraldSetup setup() const {
        const auto n_raw = get_int("setup.N", 1);
        if (n_raw < 1) {
            throw ConfigError("setup.N must be >= 1");
        }
        const auto n = static_cast<std::size_t>(n_raw);
        HeraldSetup s;
        s.split = has("setup.split") ? per_output("setup.split", n, 0.0) : std::vector<double>(n, 1.0 / double(n));
        const auto eta = per_output("setup.eta", n, 1.0);
        const auto dark = per_output("setup.dark_rate", n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            s.detectors.push_back(DetectorConfig{eta[j], dark[j]});
        }
        const auto trigger = get_string("setup.trigger", "any");
        if (trigger == "any") {
            s.trigger = AnyOneDetector{};
        } else {
            // 1-based on the command line
            const auto k = detail::parse_int("setup.trigger", trigger);
            if (k < 1 || static_cast<std::size_t>(k) > n) {
                throw ConfigError("setup.trigger must be 'any' or a detector number in 1..N");
            }
            s.trigger = SpecificDetector{static_cast<std::size_t>(k - 1)};
        }
        s.validate();
        return s;
    }

    [[nodiscard]] QKDLink link() const {
        QKDLink l;
        l.T_alice = get_double("link.T_alice", 1.0);
        l.alpha_db_per_km = get_double("link.alpha_db_per_km", 0.2);
        l.length_km = get_double("link.L_km", 0.0);
        l.l_bob_db = get_double("link.l_bob_db", 0.0);
        l.eta_bob = get_double("link.eta_bob", 1.0);
        l.dark_bob = get_double("link.dark_bob", 0.0);
        l.intrinsic_error = get_double("link.c", 0.0);
        l.validate();
        return l;
    }

    [[nodiscard]] MuRange mu_range() const {
        MuRange r{get_double("optimize.mu_lo", 1e-8), get_double("optimize.mu_hi", 10.0)};
        if (!(r.lo >= 1e-8 && r.hi <= 10.0 && r.lo < r.hi)) {
            throw ConfigError("optimize.mu_lo/mu_hi must satisfy 1e-8 <= lo < hi <= 10");
        }
        return r;
    }

    /// Distribution factory for the configured source.
    [[nodiscard]] DistributionFactory factory() const {
        if (source_kind() == SourceKind::Coherent) {
            return coherent_factory();
        }
        return heralded_factory(source(), coupling(), setup());
    }

    [[nodiscard]] std::optional<Sweep> sweep() const {
        if (!has("sweep.axis")) {
            return std::nullopt;
        }
        Sweep s;
        s.axis = *get("sweep.axis");
        if (!known_keys().contains(s.axis) || s.axis.starts_with("sweep.") || s.axis.starts_with("output.")) {
            throw ConfigError("sweep.axis must name a numeric configuration key");
        }
        if (has("sweep.values")) {
            for (const auto& item : detail::split_list(*get("sweep.values"))) {
                s.values.push_back(detail::parse_double("sweep.values", item));
            }
        } else {
            const auto points = get_int("sweep.points", 0);
            if (points < 1) {
                throw ConfigError("sweep needs sweep.points >= 1 or sweep.values");
            }
            const double from = get_double("sweep.from", 0.0);
            const double to = get_double("sweep.to", from);
            const auto spacing = get_string("sweep.spacing", "linear");
            if (spacing != "linear" && spacing != "log") {
                throw ConfigError("sweep.spacing must be linear or log");
            }
            if (spacing == "log" && !(from > 0.0 && to > 0.0)) {
                throw ConfigError("log sweep needs positive endpoints");
            }
            for (std::int64_t i = 0; i < points; ++i) {
                const double t = points == 1 ? 0.0 : double(i) / double(points - 1);
                s.values.push_back(spacing == "log" ? std::exp(std::log(from) + t * (std::log(to) - std::log(from)))
                                                    : from + t * (to - from));
            }
            // Pin the endpoints exactly.
            s.values.front() = from;
            s.values.back() = points == 1 ? from : to;
        }
        if (s.values.empty()) {
            throw ConfigError("sweep range is empty");
        }
        return s;
    }

    [[nodiscard]] std::string output_format() const {
        const auto f = get_string("output.format", "csv");
        if (f != "csv" && f != "json") {
            throw ConfigError("output.format must be csv or json");
        }
        return f;
    }

  private:
    [[nodiscard]] NoiseLevel noise(const std::string& key) const {
        auto text = get_string(key, "0");
        text.erase(std::remove(text.begin(), text.end(), ' '), text.end());
        for (const std::string_view suffix : {"*mu", "mu"}) {
            if (text.size() > suffix.size() && text.ends_with(suffix)) {
                return NoiseLevel::fraction_of_mu(
                    detail::parse_double(key, std::string_view(text).substr(0, text.size() - suffix.size())));
            }
        }
        return NoiseLevel::absolute(detail::parse_double(key, text));
    }

    [[nodiscard]] std::vector<double> per_output(const std::string& key, std::size_t n, double fallback) const {
        const auto v = get(key);
        if (!v) {
            return std::vector<double>(n, fallback);
        }
        std::vector<double> out;
        for (const auto& item : detail::split_list(*v)) {
            out.push_back(detail::parse_double(key, item));
        }
        if (out.size() == 1) {
            out.assign(n, out.front());
        }
        if (out.size() != n) {
            throw ConfigError(key + " needs 1 or setup.N entries");
        }
        return out;
    }

    std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace herald::cli
