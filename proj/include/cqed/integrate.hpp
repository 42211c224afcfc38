#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cqed/eom.hpp"
#include "cqed/layout.hpp"

namespace cqed {

struct IntegratorConfig {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_time = 1e4;       // us
    double ss_rel_tol = 1e-8;    // stationarity threshold on the derivative norm
    double window = 50.0;        // trailing observation window, us
    double phys_tol = 1e-6;      // slack on |<sz>| <= 1
    double max_step = 0.0;       // 0 = derive as 1/(10 kappa) from the system
    double init_step = 1e-4;

    void validate() const {
        if (!(rtol > 0.0) || !(atol > 0.0))
            throw invalid_parameter("IntegratorConfig: rtol and atol must be > 0");
        if (!(max_time > 0.0) || !(window > 0.0))
            throw invalid_parameter("IntegratorConfig: max_time and window must be > 0");
    }
};

enum class OutcomeKind { Stationary, LimitCycle, Unphysical, Timeout };

const char* to_string(OutcomeKind k);

struct Outcome {
    OutcomeKind kind = OutcomeKind::Timeout;
    double final_time = 0.0;
    double oscillation_amplitude = 0.0;  // peak-to-peak of |<a>|^2, LimitCycle only
    std::string offending;               // variable that broke physicality
};

struct stiffness_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using RhsFn = std::function<void(const Vec&, Vec&)>;

/// Accepted-step callback; return false to stop the integration.
/// `dense` evaluates the continuous extension on [t_prev, t].
struct StepInfo {
    double t_prev, t;
    const Vec& x;
    const Vec& dxdt;
    std::function<Vec(double)> dense;
};
using StepCallback = std::function<bool(const StepInfo&)>;

/// Adaptive Dormand-Prince 5(4) driver with PI step control.
/// Integrates from t0 to t1 or until the callback stops it; returns the final
/// (t, x). Throws stiffness_error on step-size underflow.
std::pair<double, Vec> integrate_adaptive(const RhsFn& rhs, Vec x0, double t0, double t1,
                                          const IntegratorConfig& cfg,
                                          const StepCallback& on_step = {});

struct TrajectoryPoint {
    double t;
    Vec state;
};

/// Dense-output sampling of the flow at the requested times.
std::vector<TrajectoryPoint> evolve(const RhsFn& rhs, const Vec& x0,
                                    const IntegratorConfig& cfg,
                                    const std::vector<double>& sample_times);

struct StationaryResult {
    Vec state;
    Outcome outcome;
};

/// Integrate the moment equations until the scaled derivative norm stays below
/// ss_rel_tol for a trailing window (Stationary), or classify the run as
/// LimitCycle / Unphysical / Timeout.
StationaryResult find_stationary(CumulantEom& eom, const Vec& x0, IntegratorConfig cfg);

struct BasinAttempt {
    double sz0;
    Outcome outcome;
};

struct basin_exhausted : std::runtime_error {
    explicit basin_exhausted(const std::string& msg, std::vector<BasinAttempt> a)
        : std::runtime_error(msg), attempts(std::move(a)) {}
    std::vector<BasinAttempt> attempts;
};

struct BasinScanResult {
    double sz0_used;
    Vec state;
    Outcome outcome;
    std::vector<BasinAttempt> attempts;
};

/// Try factorized initial states <sz> = sz0 in grid order; first Stationary
/// wins. Throws basin_exhausted when no grid point settles.
BasinScanResult basin_scan(CumulantEom& eom, const std::vector<double>& sz0_grid,
                           const IntegratorConfig& cfg);

}  // namespace cqed
