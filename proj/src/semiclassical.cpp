#include "cqed/semiclassical.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>

namespace cqed {

const char* to_string(Branch b) {
    switch (b) {
        case Branch::Lower: return "lower";
        case Branch::Middle: return "middle";
        default: return "upper";
    }
}

double semiclassical_eta(double c, double n0, double kappa, double x) {
    return kappa * std::sqrt(x) * (1.0 + c / (1.0 + x / n0));
}

bool is_bistable(double c) { return c > 8.0; }

namespace {

// Real nonnegative roots of a3 x^3 + a2 x^2 + a1 x + a0, ascending.
std::vector<double> cubic_roots(double a3, double a2, double a1, double a0) {
    Eigen::Matrix3d comp = Eigen::Matrix3d::Zero();
    comp(0, 2) = -a0 / a3;
    comp(1, 2) = -a1 / a3;
    comp(2, 2) = -a2 / a3;
    comp(1, 0) = 1.0;
    comp(2, 1) = 1.0;
    Eigen::EigenSolver<Eigen::Matrix3d> es(comp, false);

    const double scale = std::max({std::abs(a0 / a3), std::abs(a1 / a3),
                                   std::abs(a2 / a3), 1.0});
    std::vector<double> roots;
    for (int i = 0; i < 3; ++i) {
        std::complex<double> z = es.eigenvalues()[i];
        if (std::abs(z.imag()) > 1e-8 * (std::abs(z.real()) + std::cbrt(scale))) continue;
        double x = z.real();
        for (int it = 0; it < 4; ++it) {  // Newton polish
            const double p = ((a3 * x + a2) * x + a1) * x + a0;
            const double dp = (3.0 * a3 * x + 2.0 * a2) * x + a1;
            if (dp == 0.0) break;
            x -= p / dp;
        }
        if (x >= -1e-12) roots.push_back(std::max(x, 0.0));
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

// Merge near-degenerate roots, flagging tangency.
std::vector<std::pair<double, bool>> merge_roots(std::vector<double> roots) {
    std::vector<std::pair<double, bool>> out;
    for (std::size_t i = 0; i < roots.size();) {
        std::size_t j = i + 1;
        while (j < roots.size() &&
               roots[j] - roots[i] < 1e-7 * std::max(1.0, roots[j]))
            ++j;
        double x = 0.0;
        for (std::size_t m = i; m < j; ++m) x += roots[m];
        out.emplace_back(x / static_cast<double>(j - i), j - i > 1);
        i = j;
    }
    return out;
}

std::vector<BranchPoint> label_solutions(std::vector<std::pair<double, bool>> xs,
                                         double eta) {
    std::vector<BranchPoint> pts;
    const std::size_t n = xs.size();
    for (std::size_t i = 0; i < n; ++i) {
        Branch b = Branch::Lower;
        if (n >= 2 && i == n - 1) b = Branch::Upper;
        else if (i > 0) b = Branch::Middle;
        const bool stable = (i % 2 == 0);
        pts.push_back({xs[i].first, eta, b, stable, xs[i].second});
    }
    return pts;
}

}  // namespace

std::vector<BranchPoint> homogeneous_steady_states(double c, double n0, double eta,
                                                   double kappa) {
    if (!(c >= 0.0) || !(n0 > 0.0) || !(kappa > 0.0) || !(eta >= 0.0))
        throw invalid_parameter("homogeneous_steady_states: need c>=0, n0>0, kappa>0, eta>=0");
    if (eta == 0.0) return {{0.0, 0.0, Branch::Lower, true, false}};

    const double e = eta * eta / (kappa * kappa);
    // x (1 + C/(1+x/n0))^2 = E, multiplied out in powers of x
    const double a3 = 1.0 / (n0 * n0);
    const double a2 = 2.0 * (1.0 + c) / n0 - e / (n0 * n0);
    const double a1 = (1.0 + c) * (1.0 + c) - 2.0 * e / n0;
    const double a0 = -e;
    auto pts = label_solutions(merge_roots(cubic_roots(a3, a2, a1, a0)), eta);
    // a single root beyond the upper turning point sits on the upper branch
    if (pts.size() == 1 && is_bistable(c)) {
        const double uplus = 0.5 * ((c - 2.0) + std::sqrt(c * (c - 8.0)));
        if (pts[0].x >= uplus * n0) pts[0].branch = Branch::Upper;
    }
    return pts;
}

CriticalAnalysis critical_drives(double c, double n0, double kappa) {
    if (!(c > 0.0) || !(n0 > 0.0) || !(kappa > 0.0))
        throw invalid_parameter("critical_drives: need c>0, n0>0, kappa>0");

    CriticalAnalysis out;
    out.bistable = is_bistable(c);
    if (out.bistable) {
        const double disc = std::sqrt(c * (c - 8.0));
        const double uminus = 0.5 * ((c - 2.0) - disc);
        const double uplus = 0.5 * ((c - 2.0) + disc);
        CriticalDrives d;
        d.x_at_eta_plus = uminus * n0;
        d.x_at_eta_minus = uplus * n0;
        d.eta_plus = semiclassical_eta(c, n0, kappa, d.x_at_eta_plus);
        d.eta_minus = semiclassical_eta(c, n0, kappa, d.x_at_eta_minus);
        out.drives = d;
        out.eta_max_slope = d.eta_plus;
        out.x_at_max_slope = d.x_at_eta_plus;
        return out;
    }

    // Slope of the amplitude |<a>| vs eta equals (1+u)^2 / (kappa Q(u)) with
    // u = x/n0 and Q(u) = u^2+(2-C)u+1+C. This is the bounded objective: the
    // slope of x vs eta grows without limit at large u and has no interior
    // maximum. Setting the derivative to zero gives 2Q - (1+u)Q' = C(3-u),
    // so the maximizer sits at u = 3 for every C; Q(3) = 16-2C vanishes at
    // C = 8 where the maximum turns into the merged turning point.
    out.x_at_max_slope = 3.0 * n0;
    out.eta_max_slope = semiclassical_eta(c, n0, kappa, out.x_at_max_slope);
    return out;
}

namespace {

// Self-consistency map: x -> |<a>(x)|^2 with saturated per-cluster inversion.
struct InhomMap {
    const ClusterEnsemble& e;
    const PhysicalParams& p;
    double eta;

    double sz(std::size_t mu, double x) const {
        const double gperp = p.gamma_h + 2.0 * p.gamma_p;
        const auto& c = e.clusters[mu];
        const double sat = 2.0 * c.g * c.g * gperp * x /
                           (p.gamma_h * (gperp * gperp + c.delta * c.delta));
        return -1.0 / (1.0 + sat);
    }

    double operator()(double x) const {
        const double gperp = p.gamma_h + 2.0 * p.gamma_p;
        std::complex<double> denom(p.kappa, p.delta_c);
        for (std::size_t mu = 0; mu < e.size(); ++mu) {
            const auto& c = e.clusters[mu];
            denom -= c.weight * c.g * c.g * sz(mu, x) /
                     std::complex<double>(gperp, c.delta);
        }
        return eta * eta / std::norm(denom);
    }

    double weighted_sz(double x) const {
        double num = 0.0, den = 0.0;
        for (std::size_t mu = 0; mu < e.size(); ++mu) {
            num += e.clusters[mu].weight * sz(mu, x);
            den += e.clusters[mu].weight;
        }
        return den > 0.0 ? num / den : -1.0;
    }
};

constexpr double kSelfConsistencyTol = 1e-11;

bool converged(double x, double gx) {
    return std::abs(gx - x) <= kSelfConsistencyTol * std::max(1.0, std::abs(x));
}

// Newton on r(x) = G(x) - x with a damped fixed-point fallback.
std::optional<double> solve_from(const InhomMap& map, double x0) {
    double x = std::max(x0, 0.0);
    for (int it = 0; it < 100; ++it) {
        const double gx = map(x);
        if (converged(x, gx)) return x;
        const double h = 1e-7 * std::max(x, 1e-8);
        const double dr = (map(x + h) - map(std::max(x - h, 0.0))) /
                              (x + h - std::max(x - h, 0.0)) - 1.0;
        double xn;
        if (std::abs(dr) > 1e-12) {
            xn = x - (gx - x) / dr;
        } else {
            xn = gx;
        }
        if (!(xn >= 0.0) || !std::isfinite(xn)) xn = 0.5 * (x + gx);
        if (std::abs(xn - x) > 10.0 * std::max(1.0, x)) xn = 0.5 * (x + gx);
        x = xn;
    }
    const double gx = map(x);
    if (converged(x, gx)) return x;
    return std::nullopt;
}

// All fixed points of the map in [0, (eta/kappa)^2], by dense sign scan of
// G(x) - x plus bisection and Newton polish.
std::vector<double> all_fixed_points(const InhomMap& map) {
    const double xmax = map.eta * map.eta / (map.p.kappa * map.p.kappa) * (1.0 + 1e-9);
    const int n = 2000;
    std::vector<double> roots;
    double xprev = 0.0, rprev = map(0.0) - 0.0;
    for (int i = 1; i <= n; ++i) {
        const double x = xmax * i / n;
        const double r = map(x) - x;
        if ((rprev > 0.0) != (r > 0.0) || r == 0.0) {
            double lo = xprev, hi = x;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double rm = map(mid) - mid;
                if ((rm > 0.0) == (rprev > 0.0)) lo = mid; else hi = mid;
            }
            if (auto s = solve_from(map, 0.5 * (lo + hi))) roots.push_back(*s);
            else roots.push_back(0.5 * (lo + hi));
        }
        xprev = x;
        rprev = r;
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) {
                                return b - a < 1e-6 * std::max(1.0, b);
                            }),
                roots.end());
    return roots;
}

}  // namespace

BranchPoint inhom_steady_state(const ClusterEnsemble& ensemble,
                               const PhysicalParams& params, double eta,
                               double x_guess) {
    ensemble.validate();
    params.validate();
    if (!(eta >= 0.0) || !(x_guess >= 0.0))
        throw invalid_parameter("inhom_steady_state: eta and x_guess must be >= 0");
    InhomMap map{ensemble, params, eta};

    auto sol = solve_from(map, x_guess);
    if (!sol) {
        // basin hopping from the guess failed (turning-point neighborhood);
        // pick the fixed point nearest the guess from a full scan
        auto roots = all_fixed_points(map);
        if (roots.empty()) {
            const double x = x_guess;
            throw no_convergence("inhom_steady_state: self-consistency not reached",
                                 std::abs(map(x) - x) / std::max(1.0, x));
        }
        double best = roots[0];
        for (double r : roots)
            if (std::abs(r - x_guess) < std::abs(best - x_guess)) best = r;
        sol = best;
    }

    const double x = *sol;
    auto roots = all_fixed_points(map);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < roots.size(); ++i)
        if (std::abs(roots[i] - x) < std::abs(roots[idx] - x)) idx = i;

    Branch b = Branch::Lower;
    if (roots.size() >= 2 && idx == roots.size() - 1) b = Branch::Upper;
    else if (idx > 0) b = Branch::Middle;
    else if (roots.size() == 1 && map.weighted_sz(x) > -0.5) b = Branch::Upper;
    return {x, eta, b, idx % 2 == 0, false};
}

namespace {

// Drive amplitude on the inhomogeneous stationary curve at photon number x:
// <a>[kappa + i delta_c - sum_mu M_mu g_mu^2 sz_mu(x)/(gperp + i delta_mu)] = eta.
double ensemble_eta_of_x(const ClusterEnsemble& e, const PhysicalParams& p, double x) {
    const double gperp = p.gamma_h + 2.0 * p.gamma_p;
    std::complex<double> denom(p.kappa, p.delta_c);
    for (const auto& c : e.clusters) {
        const double sat = 2.0 * c.g * c.g * gperp * x /
                           (p.gamma_h * (gperp * gperp + c.delta * c.delta));
        denom += c.weight * c.g * c.g / ((1.0 + sat) * std::complex<double>(gperp, c.delta));
    }
    return std::sqrt(x) * std::abs(denom);
}

}  // namespace

CriticalAnalysis ensemble_critical_drives(const ClusterEnsemble& ensemble,
                                          const PhysicalParams& params) {
    ensemble.validate();
    params.validate();
    if (ensemble.size() == 1 && ensemble.clusters[0].delta == 0.0 &&
        params.gamma_p == 0.0 && params.delta_c == 0.0) {
        const double c = cooperativity(ensemble, params);
        const double n0 = saturation_photon_number(ensemble.clusters[0].g, params.gamma_h);
        return critical_drives(c, n0, params.kappa);
    }

    // characteristic photon scale from the weighted mean coupling
    double g2 = 0.0;
    for (const auto& c : ensemble.clusters) g2 += c.weight * c.g * c.g;
    g2 /= ensemble.total_spins;
    const double n0 = params.gamma_h * params.gamma_h / (2.0 * g2);

    auto eta_of = [&](double x) { return ensemble_eta_of_x(ensemble, params, x); };
    auto refine = [&](double lo, double hi, bool maximize) {
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
        double f1 = eta_of(x1), f2 = eta_of(x2);
        while (hi - lo > 1e-12 * hi) {
            const bool move_right = maximize ? (f1 < f2) : (f1 > f2);
            if (move_right) {
                lo = x1; x1 = x2; f1 = f2;
                x2 = lo + phi * (hi - lo); f2 = eta_of(x2);
            } else {
                hi = x2; x2 = x1; f2 = f1;
                x1 = hi - phi * (hi - lo); f1 = eta_of(x1);
            }
        }
        return 0.5 * (lo + hi);
    };

    // dense logarithmic scan for the first local max (end of the lower
    // branch) and the following local min (end of the upper branch)
    const int n = 4000;
    const double lo = 1e-5 * n0, hi = 1e4 * n0;
    const double step = std::pow(hi / lo, 1.0 / n);
    CriticalAnalysis out{};
    double xprev = lo, fprev = eta_of(lo), x = lo * step, f = eta_of(x);
    int imax = -1, imin = -1;
    double xmax_lo = 0, xmax_hi = 0, xmin_lo = 0, xmin_hi = 0;
    for (int i = 2; i <= n; ++i) {
        const double xn = lo * std::pow(step, i);
        const double fn = eta_of(xn);
        if (imax < 0 && f > fprev && f > fn) {
            imax = i; xmax_lo = xprev; xmax_hi = xn;
        } else if (imax >= 0 && imin < 0 && f < fprev && f < fn) {
            imin = i; xmin_lo = xprev; xmin_hi = xn;
        }
        xprev = x; fprev = f; x = xn; f = fn;
    }

    if (imax >= 0 && imin >= 0) {
        const double x_plus = refine(xmax_lo, xmax_hi, true);
        const double x_minus = refine(xmin_lo, xmin_hi, false);
        out.bistable = true;
        out.drives = CriticalDrives{eta_of(x_minus), eta_of(x_plus), x_minus, x_plus};
        out.eta_max_slope = out.drives->eta_plus;
        out.x_at_max_slope = x_plus;
        return out;
    }

    // monotone curve: maximize the slope of sqrt(x) vs eta
    auto neg_slope = [&](double xx) {
        const double h = 1e-6 * xx;
        const double de = eta_of(xx + h) - eta_of(xx - h);
        const double da = std::sqrt(xx + h) - std::sqrt(xx - h);
        return -(da / de);
    };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double slo = lo, shi = hi;
    double x1 = shi - phi * (shi - slo), x2 = slo + phi * (shi - slo);
    double f1 = neg_slope(x1), f2 = neg_slope(x2);
    while (shi - slo > 1e-10 * shi) {
        if (f1 < f2) {
            shi = x2; x2 = x1; f2 = f1;
            x1 = shi - phi * (shi - slo); f1 = neg_slope(x1);
        } else {
            slo = x1; x1 = x2; f1 = f2;
            x2 = slo + phi * (shi - slo); f2 = neg_slope(x2);
        }
    }
    out.bistable = false;
    out.x_at_max_slope = 0.5 * (slo + shi);
    out.eta_max_slope = eta_of(out.x_at_max_slope);
    return out;
}

std::vector<BranchPoint> semiclassical_curve(const ClusterEnsemble& ensemble,
                                             const PhysicalParams& params,
                                             const std::vector<double>& eta_grid) {
    ensemble.validate();
    params.validate();
    for (std::size_t i = 1; i < eta_grid.size(); ++i)
        if (!(eta_grid[i - 1] < eta_grid[i]))
            throw invalid_parameter("semiclassical_curve: eta_grid must be ascending");

    std::vector<BranchPoint> out;
    for (double eta : eta_grid) {
        if (eta == 0.0) {
            out.push_back({0.0, 0.0, Branch::Lower, true, false});
            continue;
        }
        InhomMap map{ensemble, params, eta};
        auto roots = all_fixed_points(map);
        std::vector<std::pair<double, bool>> xs;
        xs.reserve(roots.size());
        for (double r : roots) xs.emplace_back(r, false);
        auto pts = label_solutions(std::move(xs), eta);
        if (pts.size() == 1 && map.weighted_sz(pts[0].x) > -0.5)
            pts[0].branch = Branch::Upper;
        out.insert(out.end(), pts.begin(), pts.end());
    }
    return out;
}

}  // namespace cqed
