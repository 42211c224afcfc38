#pragma once

#include <string>
#include <vector>

#include "cqed/integrate.hpp"
#include "cqed/model.hpp"
#include "cqed/semiclassical.hpp"

namespace cqed {

/// x_ce / x_sc; throws when the semiclassical reference vanishes.
double normalized_amplitude(double x_ce, double x_sc);

/// Relative deviations between closure orders, denominators taken from the
/// higher order: d12 = |x1-x2|/x2, d23 = |x2-x3|/x3, d13 = |x1-x3|/x3.
struct DeviationTriple {
    double d12 = 0.0, d23 = 0.0, d13 = 0.0;
    double x_ce1 = 0.0, x_ce2 = 0.0, x_ce3 = 0.0;

    bool all_below(double eps) const { return d12 < eps && d23 < eps && d13 < eps; }
};

struct SolverSettings {
    IntegratorConfig integrator;  // max_time <= 0 selects the adaptive default
    std::vector<double> sz0_grid = {-1.0, -0.9, -0.8, -0.7, -0.6, -0.5};
    double eta_plus = 0.0;  // critical drive for the adaptive time horizon
};

/// Time horizon scaled by the distance to the critical drive,
/// 10^3/kappa * max(1, 1/|1 - eta/eta_plus|), capped at 200x.
double adaptive_max_time(const PhysicalParams& params, double eta_plus);

/// Stationary |<a>|^2 under one closure order, from the unexcited state with
/// basin fallback. Throws basin_exhausted (tagged with the order) on failure.
double stationary_photon(CumulantOrder order, const ClusterEnsemble& ensemble,
                         const PhysicalParams& params, const SolverSettings& settings);

DeviationTriple deviation_triple(const ClusterEnsemble& ensemble,
                                 const PhysicalParams& params,
                                 const SolverSettings& settings);

struct boundary_not_found : std::runtime_error {
    boundary_not_found(const std::string& msg, std::vector<std::pair<double, DeviationTriple>> t)
        : std::runtime_error(msg), trace(std::move(t)) {}
    std::vector<std::pair<double, DeviationTriple>> trace;
};

struct NscResult {
    double n_sc = 0.0;  // rounded up to the next integer
    DeviationTriple at_nsc;
    std::vector<std::pair<double, DeviationTriple>> trace;
};

/// Smallest ensemble size at which all three deviations stay below delta_eps,
/// confirmed over the next confirm_points grid values. The ensemble is
/// rescaled to each trial N with the cooperativity held fixed; N is treated
/// as real during bisection and rounded up in the result.
NscResult nsc_search(const ClusterEnsemble& base, const PhysicalParams& params,
                     double delta_eps, double n_lo, double n_hi, int confirm_points,
                     const SolverSettings& settings, int points_per_decade = 12);

struct BoundaryTask {
    std::string label;      // row identifier for the CSV (C or Gamma value)
    double c_or_gamma = 0;  // numeric value of the row parameter
    ClusterEnsemble base;
    PhysicalParams params;  // eta set for the base ensemble size
    double eta_ratio = 0.0;
    double eta_plus = 0.0;
};

struct BoundaryPoint {
    std::string label;
    double c_or_gamma = 0.0;
    double eta_ratio = 0.0;
    double n_sc = 0.0;
    DeviationTriple dev;
    std::string status;  // "ok" or the per-point failure
};

/// Parallel map of nsc_search over independent grid points; results are
/// aggregated in task order so the output is independent of scheduling.
std::vector<BoundaryPoint> boundary_sweep(const std::vector<BoundaryTask>& tasks,
                                          double delta_eps, double n_lo, double n_hi,
                                          int confirm_points,
                                          const SolverSettings& settings, int workers,
                                          int points_per_decade = 12);

}  // namespace cqed
