// Heralded source with four realistic detectors, then the key rate it
// supports over standard telecom fiber.
#include <cstdio>

#include "herald/metrics.hpp"
#include "herald/qkd.hpp"
#include "herald/source_model.hpp"

int main() {
    using namespace herald;

    PairSourceConfig source;
    source.mu = 0.1;
    const auto coupling = CouplingConfig::symmetric(0.6, NoiseLevel::fraction_of_mu(0.0));
    const auto setup = HeraldSetup::symmetric(4, DetectorConfig{0.7, 20.0});

    const auto dist = heralded_distribution(source, coupling, setup);
    const auto m = compute_metrics(dist);
    std::printf("mu = %.3g: p_post = %.4g, p_vac = %.4g, c_multi = %.4g, F = %.4g\n", source.mu, m.p_post, m.p_vac,
                m.c_multi, m.fano);
    for (std::size_t n = 0; n <= 3; ++n) {
        std::printf("  p(%zu) = %.6g\n", n, dist[n]);
    }

    QKDLink link;
    link.T_alice = 0.79;
    link.alpha_db_per_km = 0.2;
    link.intrinsic_error = 0.01;
    link.eta_bob = 0.18;
    link.dark_bob = 2e-5;

    const auto make = heralded_factory(source, coupling, setup);
    for (double km : {0.0, 50.0, 100.0}) {
        const auto opt = optimize_mu(make, link.at_length(km));
        std::printf("L = %5.1f km: mu_opt = %.4g, G_opt = %.4g\n", km, opt.mu, opt.breakdown.G);
    }
    std::printf("maximum distance: %.2f km\n", max_distance(make, link));
    std::printf("coherent source:  %.2f km\n", max_distance(coherent_factory(), link));
}
