#include "cqed/model.hpp"

#include <cmath>

namespace cqed {

void PhysicalParams::validate() const {
    if (!(kappa > 0.0)) throw invalid_parameter("kappa must be > 0");
    if (!(gamma_h > 0.0)) throw invalid_parameter("gamma_h must be > 0");
    if (!(gamma_p >= 0.0)) throw invalid_parameter("gamma_p must be >= 0");
    if (!(eta >= 0.0)) throw invalid_parameter("eta must be >= 0");
    if (!std::isfinite(delta_c)) throw invalid_parameter("delta_c must be finite");
}

PhysicalParams PhysicalParams::reference(double eta) {
    PhysicalParams p;
    p.kappa = mhz_to_rad(1.0);
    p.gamma_h = 0.5 * p.kappa;
    p.gamma_p = 0.0;
    p.delta_c = 0.0;
    p.eta = eta;
    return p;
}

void ClusterEnsemble::validate() const {
    if (clusters.empty()) throw invalid_parameter("ensemble has no clusters");
    double sum = 0.0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const auto& c = clusters[i];
        if (!(c.weight >= 0.0)) throw invalid_parameter("cluster weight must be >= 0");
        if (!std::isfinite(c.g) || !std::isfinite(c.delta))
            throw invalid_parameter("cluster fields must be finite");
        if (i > 0 && !(clusters[i - 1].delta < c.delta))
            throw invalid_parameter("cluster detunings must be strictly increasing");
        sum += c.weight;
    }
    if (std::abs(sum - total_spins) > 1e-12 * std::max(1.0, std::abs(total_spins)))
        throw invalid_parameter("cluster weights do not sum to total_spins");
}

ClusterEnsemble ClusterEnsemble::homogeneous(double n, double g, double delta) {
    ClusterEnsemble e;
    e.clusters.push_back({delta, g, n});
    e.total_spins = n;
    e.validate();
    return e;
}

double cooperativity(const ClusterEnsemble& ensemble, const PhysicalParams& params) {
    ensemble.validate();
    params.validate();
    double sum = 0.0;
    const double gh2 = params.gamma_h * params.gamma_h;
    for (const auto& c : ensemble.clusters)
        sum += c.weight * c.g * c.g / (1.0 + c.delta * c.delta / gh2);
    return sum / (params.kappa * params.gamma_h);
}

double saturation_photon_number(double g, double gamma_h) {
    if (!(g > 0.0)) throw invalid_parameter("saturation_photon_number: g must be > 0");
    return gamma_h * gamma_h / (2.0 * g * g);
}

std::pair<ClusterEnsemble, PhysicalParams> scale_ensemble(const ClusterEnsemble& ensemble,
                                                          const PhysicalParams& params,
                                                          double n_target) {
    if (!(n_target > 0.0)) throw invalid_parameter("scale_ensemble: n_target must be > 0");
    ensemble.validate();
    const double ratio = ensemble.total_spins / n_target;
    ClusterEnsemble scaled = ensemble;
    scaled.total_spins = n_target;
    for (auto& c : scaled.clusters) {
        c.g *= std::sqrt(ratio);
        c.weight /= ratio;
    }
    PhysicalParams p = params;
    p.eta = params.eta / std::sqrt(ratio);
    return {std::move(scaled), p};
}

ClusterEnsemble gaussian_ensemble(double n, double gamma_fwhm, double g, int l, double span) {
    if (l < 3 || l % 2 == 0)
        throw invalid_parameter("gaussian_ensemble: l must be odd and >= 3");
    if (!(gamma_fwhm > 0.0)) throw invalid_parameter("gaussian_ensemble: gamma_fwhm must be > 0");
    if (!(span > 0.0)) throw invalid_parameter("gaussian_ensemble: span must be > 0");

    const double half_width = span * gamma_fwhm;
    const double dstep = 2.0 * half_width / static_cast<double>(l - 1);
    const double c4ln2 = 4.0 * std::log(2.0) / (gamma_fwhm * gamma_fwhm);

    ClusterEnsemble e;
    e.clusters.reserve(static_cast<std::size_t>(l));
    double norm = 0.0;
    for (int i = 0; i < l; ++i) {
        // symmetric grid with an exact zero at the center
        const double delta = dstep * static_cast<double>(i - (l - 1) / 2);
        const double w = std::exp(-c4ln2 * delta * delta);
        e.clusters.push_back({delta, g, w});
        norm += w;
    }
    for (auto& c : e.clusters) c.weight *= n / norm;
    e.total_spins = n;
    e.validate();
    return e;
}

}  // namespace cqed
