#include "cqed/integrate.hpp"

#include <cmath>
#include <deque>
#include <sstream>

namespace cqed {

const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Stationary: return "stationary";
        case OutcomeKind::LimitCycle: return "limit_cycle";
        case OutcomeKind::Unphysical: return "unphysical";
        default: return "timeout";
    }
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output coefficients
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

}  // namespace

std::pair<double, Vec> integrate_adaptive(const RhsFn& rhs, Vec x, double t0, double t1,
                                          const IntegratorConfig& cfg,
                                          const StepCallback& on_step) {
    cfg.validate();
    const auto n = x.size();
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), xtmp(n), xnew(n), err(n);

    double t = t0;
    double h = std::min(cfg.init_step, t1 - t0);
    const double hmax = cfg.max_step > 0.0 ? cfg.max_step : (t1 - t0);
    h = std::min(h, hmax);
    double errold = 1e-4;
    rhs(x, k1);

    while (t < t1) {
        if (t + h > t1) h = t1 - t;
        if (!(h > 1e-14 * std::max(1.0, std::abs(t))))
            throw stiffness_error("step size underflow at t=" + std::to_string(t));

        xtmp = x + h * (a21 * k1);
        rhs(xtmp, k2);
        xtmp = x + h * (a31 * k1 + a32 * k2);
        rhs(xtmp, k3);
        xtmp = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(xtmp, k4);
        xtmp = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(xtmp, k5);
        xtmp = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(xtmp, k6);
        xnew = x + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        rhs(xnew, k7);  // FSAL

        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = cfg.atol + cfg.rtol * std::max(std::abs(x[i]), std::abs(xnew[i]));
            const double r = err[i] / sc;
            sum += r * r;
        }
        const double errnorm = std::sqrt(sum / static_cast<double>(n));

        if (errnorm <= 1.0 || !(std::isfinite(errnorm))) {
            if (!std::isfinite(errnorm)) {
                // let the caller's physicality monitor classify the blow-up
            }
            const double tprev = t;
            t += h;
            if (on_step) {
                const double hstep = h;
                Vec* xp = &x;
                Vec* k1p = &k1;
                Vec* k3p = &k3;
                Vec* k4p = &k4;
                Vec* k5p = &k5;
                Vec* k6p = &k6;
                Vec* k7p = &k7;
                Vec* xnp = &xnew;
                auto dense = [=](double ts) -> Vec {
                    const double th = (ts - tprev) / hstep;
                    const double th1 = 1.0 - th;
                    Vec diff = *xnp - *xp;
                    Vec r3 = hstep * (*k1p) - diff;
                    Vec r4 = diff - hstep * (*k7p) - r3;
                    Vec r5 = hstep * (d1 * (*k1p) + d3 * (*k3p) + d4 * (*k4p) +
                                      d5 * (*k5p) + d6 * (*k6p) + d7 * (*k7p));
                    return *xp + th * (diff + th1 * (r3 + th * (r4 + th1 * r5)));
                };
                StepInfo info{tprev, t, xnew, k7, dense};
                if (!on_step(info)) {
                    return {t, xnew};
                }
            }
            x.swap(xnew);
            k1.swap(k7);
            const double fac = 0.9 * std::pow(std::max(errnorm, 1e-10), -0.17) *
                               std::pow(errold, 0.04);
            h = std::min(hmax, h * std::min(5.0, std::max(0.2, fac)));
            errold = std::max(errnorm, 1e-10);
            if (!x.allFinite())
                throw stiffness_error("non-finite state at t=" + std::to_string(t));
        } else {
            h *= std::max(0.2, 0.9 * std::pow(errnorm, -0.2));
        }
    }
    return {t, x};
}

std::vector<TrajectoryPoint> evolve(const RhsFn& rhs, const Vec& x0,
                                    const IntegratorConfig& cfg,
                                    const std::vector<double>& sample_times) {
    for (std::size_t i = 1; i < sample_times.size(); ++i)
        if (!(sample_times[i - 1] < sample_times[i]))
            throw invalid_parameter("evolve: sample_times must be ascending");
    if (!sample_times.empty() &&
        (sample_times.front() < 0.0 || sample_times.back() > cfg.max_time))
        throw invalid_parameter("evolve: sample_times must lie within [0, max_time]");

    std::vector<TrajectoryPoint> traj;
    traj.reserve(sample_times.size());
    std::size_t next = 0;
    while (next < sample_times.size() && sample_times[next] <= 0.0) {
        traj.push_back({sample_times[next], x0});
        ++next;
    }
    if (next >= sample_times.size()) return traj;

    const double t_end = sample_times.back();
    auto cb = [&](const StepInfo& info) {
        while (next < sample_times.size() && sample_times[next] <= info.t) {
            traj.push_back({sample_times[next], info.dense(sample_times[next])});
            ++next;
        }
        return next < sample_times.size();
    };
    integrate_adaptive(rhs, x0, 0.0, t_end, cfg, cb);
    return traj;
}

namespace {

/// Trailing-window monitor for the stationarity / limit-cycle / physicality
/// classification used by find_stationary.
class OutcomeMonitor {
  public:
    OutcomeMonitor(const StateLayout& lo, const IntegratorConfig& cfg, double rate_scale)
        : lo_(lo), cfg_(cfg), rate_scale_(std::max(rate_scale, 1e-300)) {}

    // Returns true once a classification is reached.
    bool observe(double t, const Vec& x, const Vec& dxdt) {
        StateView s(lo_, x);
        // physicality
        if (!x.allFinite()) {
            outcome_ = {OutcomeKind::Unphysical, t, 0.0, "non-finite state"};
            return true;
        }
        for (int k = 0; k < lo_.L; ++k) {
            if (std::abs(s.sz(k)) > 1.0 + cfg_.phys_tol) {
                outcome_ = {OutcomeKind::Unphysical, t, 0.0, "sz[" + std::to_string(k) + "]"};
                return true;
            }
        }

        // stationarity: dimensionless derivative norm (change per cavity
        // lifetime, relative to the state norm) below threshold for a full
        // window; without the rate normalization the integrator's local error
        // puts a floor on the raw residual that scales with the fastest rate
        const double r = dxdt.norm() / (rate_scale_ * std::max(x.norm(), 1.0));
        last_residual_ = r;
        if (r <= cfg_.ss_rel_tol) {
            if (below_since_ < 0.0) below_since_ = t;
            if (t - below_since_ >= cfg_.window) {
                outcome_ = {OutcomeKind::Stationary, t, 0.0, ""};
                return true;
            }
        } else {
            below_since_ = -1.0;
        }

        // limit cycle: bounded, non-decaying oscillation of |<a>|^2 over two
        // consecutive trailing windows
        const double amp = std::norm(s.a());
        samples_.emplace_back(t, amp);
        while (!samples_.empty() && samples_.front().first < t - 2.0 * cfg_.window)
            samples_.pop_front();
        if (t > 5.0 * cfg_.window && samples_.size() > 16) {
            double lo1 = 1e300, hi1 = -1e300, lo2 = 1e300, hi2 = -1e300;
            double mean = 0.0;
            for (const auto& [ts, v] : samples_) {
                mean += v;
                if (ts < t - cfg_.window) {
                    lo1 = std::min(lo1, v);
                    hi1 = std::max(hi1, v);
                } else {
                    lo2 = std::min(lo2, v);
                    hi2 = std::max(hi2, v);
                }
            }
            mean /= static_cast<double>(samples_.size());
            const double ptp1 = hi1 - lo1, ptp2 = hi2 - lo2;
            const double thresh = 10.0 * cfg_.ss_rel_tol * std::max(mean, 1e-300);
            if (hi1 > lo1 && ptp1 > thresh && ptp2 > thresh && ptp2 > 0.75 * ptp1 &&
                ptp2 < 1.25 * ptp1) {
                outcome_ = {OutcomeKind::LimitCycle, t, ptp2, ""};
                return true;
            }
        }
        return false;
    }

    std::optional<Outcome> outcome() const { return outcome_; }
    double last_residual() const { return last_residual_; }

  private:
    const StateLayout& lo_;
    const IntegratorConfig& cfg_;
    double rate_scale_;
    std::deque<std::pair<double, double>> samples_;
    double below_since_ = -1.0;
    double last_residual_ = 0.0;
    std::optional<Outcome> outcome_;
};

}  // namespace

StationaryResult find_stationary(CumulantEom& eom, const Vec& x0, IntegratorConfig cfg) {
    cfg.validate();
    if (cfg.max_step <= 0.0) cfg.max_step = 1.0 / (10.0 * eom.params().kappa);

    OutcomeMonitor monitor(eom.layout(), cfg, eom.params().kappa);
    auto rhs = [&eom](const Vec& x, Vec& dx) { eom.rhs(x, dx); };
    Vec final_state = x0;
    double final_t = 0.0;
    try {
        auto cb = [&](const StepInfo& info) {
            return !monitor.observe(info.t, info.x, info.dxdt);
        };
        auto [t, x] = integrate_adaptive(rhs, x0, 0.0, cfg.max_time, cfg, cb);
        final_state = std::move(x);
        final_t = t;
    } catch (const stiffness_error& e) {
        return {x0, {OutcomeKind::Unphysical, final_t, 0.0, e.what()}};
    }
    if (auto o = monitor.outcome()) return {std::move(final_state), *o};
    return {std::move(final_state), {OutcomeKind::Timeout, final_t, 0.0, ""}};
}

BasinScanResult basin_scan(CumulantEom& eom, const std::vector<double>& sz0_grid,
                           const IntegratorConfig& cfg) {
    if (sz0_grid.empty()) throw invalid_parameter("basin_scan: empty sz0 grid");
    for (double v : sz0_grid)
        if (!(v >= -1.0 && v <= 0.0))
            throw invalid_parameter("basin_scan: sz0 values must lie in [-1, 0]");

    std::vector<BasinAttempt> attempts;
    for (double sz0 : sz0_grid) {
        Vec x0 = initial_state(eom.layout(), sz0);
        auto res = find_stationary(eom, x0, cfg);
        attempts.push_back({sz0, res.outcome});
        if (res.outcome.kind == OutcomeKind::Stationary)
            return {sz0, std::move(res.state), res.outcome, std::move(attempts)};
    }
    std::ostringstream os;
    os << "basin_scan: no stationary state found; attempts:";
    for (const auto& a : attempts) os << " sz0=" << a.sz0 << "->" << to_string(a.outcome.kind);
    throw basin_exhausted(os.str(), std::move(attempts));
}

}  // namespace cqed
