#pragma once

#include <optional>
#include <vector>

#include "cqed/model.hpp"

namespace cqed {

enum class Branch { Lower, Middle, Upper };

const char* to_string(Branch b);

/// One stationary solution of the Maxwell-Bloch (CE1) equations,
/// x = |<a>_st|^2.
struct BranchPoint {
    double x;
    double eta;
    Branch branch;
    bool stable;
    bool tangency = false;  // degenerate double root at a turning point
};

/// Turning points of the S-curve; only exists for C > 8.
struct CriticalDrives {
    double eta_minus;       // end of the upper branch (smaller drive)
    double eta_plus;        // end of the lower branch (larger drive)
    double x_at_eta_minus;  // upper turning point, x = u+ n0
    double x_at_eta_plus;   // lower turning point, x = u- n0
};

struct CriticalAnalysis {
    bool bistable;
    std::optional<CriticalDrives> drives;  // set iff bistable
    // Drive of maximal slope of |<a>| vs eta. Equals eta_plus when bistable
    // (slope diverges at the lower turning point); a finite maximum at
    // x = 3 n0 otherwise.
    double eta_max_slope;
    double x_at_max_slope;

    double eta_ref() const { return bistable ? drives->eta_plus : eta_max_slope; }
};

/// Drive amplitude on the homogeneous stationary curve at photon number x:
/// eta(x) = kappa sqrt(x) (1 + C/(1 + x/n0)).
double semiclassical_eta(double c, double n0, double kappa, double x);

/// True iff the homogeneous stationary curve has a bistable drive interval.
bool is_bistable(double c);

/// All nonnegative stationary photon numbers at drive eta, from the cubic
/// x (1 + C/(1+x/n0))^2 = eta^2/kappa^2, sorted ascending. Outer branches are
/// stable, the middle one is not; merged double roots carry the tangency flag.
std::vector<BranchPoint> homogeneous_steady_states(double c, double n0, double eta,
                                                   double kappa);

/// Turning points for C > 8, maximal-slope drive otherwise.
CriticalAnalysis critical_drives(double c, double n0, double kappa);

/// Stationary state of the inhomogeneous Maxwell-Bloch equations by scalar
/// self-consistency in x = |<a>_st|^2; x_guess selects the branch.
/// Throws no_convergence when the fixed point is not reached.
BranchPoint inhom_steady_state(const ClusterEnsemble& ensemble,
                               const PhysicalParams& params, double eta,
                               double x_guess);

/// Turning points of the inhomogeneous stationary curve eta(x), found by a
/// dense logarithmic scan with local refinement; falls back to the
/// maximal-amplitude-slope drive when the curve is monotone. Reduces to
/// critical_drives for a single resonant cluster.
CriticalAnalysis ensemble_critical_drives(const ClusterEnsemble& ensemble,
                                          const PhysicalParams& params);

/// All coexisting stationary solutions over an ascending drive grid.
std::vector<BranchPoint> semiclassical_curve(const ClusterEnsemble& ensemble,
                                             const PhysicalParams& params,
                                             const std::vector<double>& eta_grid);

}  // namespace cqed
