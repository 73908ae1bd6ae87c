#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "herald/error.hpp"

namespace herald {

enum class PairStatistics { Poisson, BoseEinstein };

/// Photon-pair generation: statistics, mean pairs per detection window, window length.
struct PairSourceConfig {
    PairStatistics statistics = PairStatistics::Poisson;
    double mu = 0.0;
    double tau = 1e-9;  // seconds

    void validate() const {
        detail::require(std::isfinite(mu) && mu >= 0.0, "source.mu must be finite and >= 0");
        detail::require(std::isfinite(tau) && tau > 0.0, "source.tau must be > 0");
    }

    /// Bose-Einstein ratio mu / (1 + mu), always in [0, 1).
    [[nodiscard]] double nu() const { return mu / (1.0 + mu); }

    [[nodiscard]] PairSourceConfig with_mu(double new_mu) const {
        auto copy = *this;
        copy.mu = new_mu;
        return copy;
    }
};

/// Additive noise mean photon number, either absolute or proportional to mu.
class NoiseLevel {
  public:
    enum class Kind { Absolute, FractionOfMu };

    constexpr NoiseLevel() = default;

    static constexpr NoiseLevel absolute(double mean) { return {Kind::Absolute, mean}; }
    static constexpr NoiseLevel fraction_of_mu(double fraction) { return {Kind::FractionOfMu, fraction}; }

    [[nodiscard]] constexpr Kind kind() const { return kind_; }
    [[nodiscard]] constexpr double value() const { return value_; }

    [[nodiscard]] double resolve(double mu) const {
        return kind_ == Kind::Absolute ? value_ : value_ * mu;
    }

    void validate(const std::string& name) const {
        detail::require(std::isfinite(value_) && value_ >= 0.0, name + " must be finite and >= 0");
    }

    friend constexpr bool operator==(const NoiseLevel&, const NoiseLevel&) = default;

  private:
    constexpr NoiseLevel(Kind kind, double value) : kind_(kind), value_(value) {}

    Kind kind_ = Kind::Absolute;
    double value_ = 0.0;
};

/// Pair-preserving collection efficiencies and extra noise in both arms.
struct CouplingConfig {
    double T_S = 1.0;
    double T_I = 1.0;
    NoiseLevel added_S;
    NoiseLevel added_I;
    /// Adds T_S*mu (signal) and T_I*mu (idler) unpaired-photon means on top of
    /// the added noise. Off by default: the binomial pair loss already produces
    /// unpaired photons, and enabling this counts them twice.
    bool unpaired_noise = false;

    [[nodiscard]] double R_S() const { return 1.0 - T_S; }
    [[nodiscard]] double R_I() const { return 1.0 - T_I; }

    static CouplingConfig symmetric(double theta, NoiseLevel added = {}) {
        CouplingConfig c;
        c.T_S = theta;
        c.T_I = theta;
        c.added_S = added;
        c.added_I = added;
        return c;
    }

    void validate() const {
        detail::require_probability(T_S, "coupling.T_S");
        detail::require_probability(T_I, "coupling.T_I");
        added_S.validate("coupling.add_S");
        added_I.validate("coupling.add_I");
    }
};

struct DetectorConfig {
    double eta = 1.0;
    double dark_rate = 0.0;  // counts per second

    /// Per-window dark click probability, using the saturating form m/(1+m).
    [[nodiscard]] double dark_probability(double tau) const {
        const double mean = dark_rate * tau;
        return mean / (1.0 + mean);
    }

    void validate() const {
        detail::require_probability(eta, "detector eta");
        detail::require(std::isfinite(dark_rate) && dark_rate >= 0.0, "detector dark rate must be >= 0");
    }

    friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

/// Postselect on a click at one particular coupler output (0-based) and silence elsewhere.
struct SpecificDetector {
    std::size_t index = 0;
};

/// Postselect on exactly one click at any output; needs a symmetric setup.
struct AnyOneDetector {};

using Trigger = std::variant<SpecificDetector, AnyOneDetector>;

/// A lossless 1xN coupler feeding N on/off detectors.
struct HeraldSetup {
    std::vector<double> split;  // intensity fractions |t_j|^2
    std::vector<DetectorConfig> detectors;
    Trigger trigger = AnyOneDetector{};

    static HeraldSetup symmetric(std::size_t n, DetectorConfig detector, Trigger trigger = AnyOneDetector{}) {
        detail::require(n >= 1, "setup.N must be >= 1");
        HeraldSetup s;
        s.split.assign(n, 1.0 / static_cast<double>(n));
        s.detectors.assign(n, detector);
        s.trigger = trigger;
        return s;
    }

    [[nodiscard]] std::size_t size() const { return split.size(); }

    [[nodiscard]] bool is_symmetric() const {
        for (std::size_t j = 1; j < split.size(); ++j) {
            if (split[j] != split[0] || !(detectors[j] == detectors[0])) {
                return false;
            }
        }
        return true;
    }

    [[nodiscard]] bool any_detector_trigger() const {
        return std::holds_alternative<AnyOneDetector>(trigger);
    }

    void validate() const {
        detail::require(!split.empty(), "setup needs at least one coupler output");
        detail::require(detectors.size() == split.size(), "setup needs one detector per coupler output");
        for (double s : split) {
            detail::require_probability(s, "coupler split fraction");
        }
        const double total = std::accumulate(split.begin(), split.end(), 0.0);
        detail::require(std::abs(total - 1.0) <= 1e-12,
                        "coupler split fractions must sum to 1 (fold insertion loss into T_S)");
        for (const auto& d : detectors) {
            d.validate();
        }
        if (const auto* specific = std::get_if<SpecificDetector>(&trigger)) {
            detail::require(specific->index < split.size(), "trigger detector index out of range");
        } else {
            detail::require(is_symmetric(), "any-detector trigger requires equal split and identical detectors");
        }
    }
};

}  // namespace herald
