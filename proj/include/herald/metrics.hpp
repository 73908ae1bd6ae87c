#pragma once

#include <cstddef>

#include "herald/error.hpp"
#include "herald/source_model.hpp"

namespace herald {

struct SourceMetrics {
    double p_post = 0.0;
    double p_coinc = 0.0;
    double p_vac = 0.0;
    double c_multi = 0.0;
    double fano = 0.0;
};

/// Multiphoton fraction among nonempty outcomes. The numerator is summed
/// directly over n >= 2 so that it stays accurate when p_1 is close to 1.
[[nodiscard]] inline double multiphoton_fraction(const PhotonNumberDistribution& dist) {
    const double nonempty = 1.0 - dist[0];
    if (!(nonempty > 0.0)) {
        throw EmptyHeraldedField("empty heralded field");
    }
    double multi = 0.0;
    for (std::size_t n = 2; n < dist.probs.size(); ++n) {
        multi += dist.probs[n];
    }
    return multi / nonempty;
}

[[nodiscard]] inline double mean_photon_number(const PhotonNumberDistribution& dist) {
    double mean = 0.0;
    for (std::size_t n = 1; n < dist.probs.size(); ++n) {
        mean += static_cast<double>(n) * dist.probs[n];
    }
    return mean;
}

/// Variance over mean. The variance uses centred second moments, which keeps
/// it accurate for nearly number-squeezed distributions.
[[nodiscard]] inline double fano_factor(const PhotonNumberDistribution& dist) {
    const double mean = mean_photon_number(dist);
    if (!(mean > 0.0)) {
        throw EmptyHeraldedField("empty heralded field");
    }
    double variance = 0.0;
    for (std::size_t n = 0; n < dist.probs.size(); ++n) {
        const double dev = static_cast<double>(n) - mean;
        variance += dev * dev * dist.probs[n];
    }
    return variance / mean;
}

[[nodiscard]] inline SourceMetrics compute_metrics(const PhotonNumberDistribution& dist) {
    SourceMetrics m;
    m.p_post = dist.r;
    m.p_vac = dist[0];
    m.p_coinc = 1.0 - m.p_vac;
    m.c_multi = multiphoton_fraction(dist);
    m.fano = fano_factor(dist);
    return m;
}

}  // namespace herald
