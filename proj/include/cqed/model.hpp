#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cqed {

// Internal unit system: angular frequencies in rad/us, time in us.
// A rate quoted as "f MHz" in the literature sense (2*pi*f) enters as
// 2*pi*f rad/us.
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline double mhz_to_rad(double f_mhz) { return kTwoPi * f_mhz; }
inline double rad_to_mhz(double w) { return w / kTwoPi; }

struct invalid_parameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct no_convergence : std::runtime_error {
    no_convergence(const std::string& msg, double residual)
        : std::runtime_error(msg), last_residual(residual) {}
    double last_residual;
};

/// Cavity/spin rates and the constant drive, all in rad/us.
struct PhysicalParams {
    double kappa;    // cavity loss rate
    double gamma_h;  // radiative spin decay
    double gamma_p;  // non-radiative dephasing (rate gamma_p/2 per spin)
    double delta_c;  // cavity detuning vs drive
    double eta;      // drive amplitude

    void validate() const;

    // kappa = 2*gamma_h = 2pi x 1 MHz, resonant drive.
    static PhysicalParams reference(double eta = 0.0);
};

/// L frequency clusters; each cluster holds a (possibly non-integer)
/// multiplicity of identical spins.
struct SpinCluster {
    double delta;   // detuning vs drive, rad/us
    double g;       // coupling, rad/us
    double weight;  // number of spins M in this cluster, >= 0
};

struct ClusterEnsemble {
    std::vector<SpinCluster> clusters;
    double total_spins = 0.0;

    std::size_t size() const { return clusters.size(); }
    void validate() const;

    static ClusterEnsemble homogeneous(double n, double g, double delta = 0.0);
};

enum class CumulantOrder { CE1 = 1, CE2 = 2, CE3 = 3 };

inline const char* to_string(CumulantOrder o) {
    switch (o) {
        case CumulantOrder::CE1: return "ce1";
        case CumulantOrder::CE2: return "ce2";
        default: return "ce3";
    }
}

/// Collective cooperativity, C = (1/kappa*gamma_h) sum_mu M_mu g_mu^2 / (1 + delta_mu^2/gamma_h^2).
double cooperativity(const ClusterEnsemble& ensemble, const PhysicalParams& params);

/// Photon saturation number, n0 = gamma_h^2 / (2 g^2).
double saturation_photon_number(double g, double gamma_h);

/// Thermodynamic rescaling: N -> n_target with g ~ 1/sqrt(N), eta ~ sqrt(N).
/// Leaves the cooperativity and the frequency distribution unchanged.
std::pair<ClusterEnsemble, PhysicalParams> scale_ensemble(const ClusterEnsemble& ensemble,
                                                          const PhysicalParams& params,
                                                          double n_target);

/// Gaussian frequency distribution of FWHM gamma_fwhm sampled on l equidistant
/// clusters spanning [-span*Gamma, +span*Gamma]; weights normalized to n.
ClusterEnsemble gaussian_ensemble(double n, double gamma_fwhm, double g, int l,
                                  double span = 2.0);

}  // namespace cqed
