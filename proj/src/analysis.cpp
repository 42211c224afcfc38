#include "cqed/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace cqed {

double normalized_amplitude(double x_ce, double x_sc) {
    if (!(x_sc > 0.0))
        throw invalid_parameter("normalized_amplitude: semiclassical reference is zero");
    return x_ce / x_sc;
}

double adaptive_max_time(const PhysicalParams& params, double eta_plus) {
    double factor = 1.0;
    if (eta_plus > 0.0) {
        const double r = params.eta / eta_plus;
        factor = std::min(200.0, std::max(1.0, 1.0 / std::abs(1.0 - r)));
    }
    return 1e3 / params.kappa * factor;
}

namespace {

IntegratorConfig effective_config(const PhysicalParams& params,
                                  const SolverSettings& settings) {
    IntegratorConfig cfg = settings.integrator;
    if (cfg.max_time <= 0.0) cfg.max_time = adaptive_max_time(params, settings.eta_plus);
    return cfg;
}

}  // namespace

double stationary_photon(CumulantOrder order, const ClusterEnsemble& ensemble,
                         const PhysicalParams& params, const SolverSettings& settings) {
    CumulantEom eom(order, ensemble, params);
    IntegratorConfig cfg = effective_config(params, settings);
    try {
        auto res = basin_scan(eom, settings.sz0_grid, cfg);
        StateView s(eom.layout(), res.state);
        return std::norm(s.a());
    } catch (const basin_exhausted& e) {
        throw basin_exhausted(std::string(to_string(order)) + ": " + e.what(), e.attempts);
    }
}

DeviationTriple deviation_triple(const ClusterEnsemble& ensemble,
                                 const PhysicalParams& params,
                                 const SolverSettings& settings) {
    DeviationTriple d;
    d.x_ce1 = stationary_photon(CumulantOrder::CE1, ensemble, params, settings);
    d.x_ce2 = stationary_photon(CumulantOrder::CE2, ensemble, params, settings);
    d.x_ce3 = stationary_photon(CumulantOrder::CE3, ensemble, params, settings);
    d.d12 = std::abs(d.x_ce1 - d.x_ce2) / d.x_ce2;
    d.d23 = std::abs(d.x_ce2 - d.x_ce3) / d.x_ce3;
    d.d13 = std::abs(d.x_ce1 - d.x_ce3) / d.x_ce3;
    return d;
}

NscResult nsc_search(const ClusterEnsemble& base, const PhysicalParams& params,
                     double delta_eps, double n_lo, double n_hi, int confirm_points,
                     const SolverSettings& settings, int points_per_decade) {
    if (!(n_lo > 0.0) || !(n_hi > n_lo))
        throw invalid_parameter("nsc_search: need 0 < n_lo < n_hi");
    if (confirm_points < 2)
        throw invalid_parameter("nsc_search: confirm_points must be >= 2");
    if (points_per_decade < 2)
        throw invalid_parameter("nsc_search: points_per_decade must be >= 2");

    std::vector<std::pair<double, DeviationTriple>> trace;
    auto probe = [&](double n) -> const DeviationTriple& {
        for (const auto& t : trace)
            if (t.first == n) return t.second;
        auto [ens, p] = scale_ensemble(base, params, n);
        trace.emplace_back(n, deviation_triple(ens, p, settings));
        return trace.back().second;
    };

    // geometric grid, extended past n_hi so the confirmation window exists
    // for a boundary found near the top of the range
    const double step = std::pow(10.0, 1.0 / points_per_decade);
    std::vector<double> grid;
    for (double n = n_lo; n < n_hi * std::pow(step, confirm_points); n *= step)
        grid.push_back(n);

    auto confirmed = [&](std::size_t i) {
        if (!probe(grid[i]).all_below(delta_eps)) return false;
        for (int c = 1; c <= confirm_points; ++c) {
            if (i + c >= grid.size()) break;
            if (!probe(grid[i + c]).all_below(delta_eps)) return false;
        }
        return true;
    };

    for (std::size_t i = 0; i < grid.size() && grid[i] <= n_hi; ++i) {
        if (!confirmed(i)) continue;
        // refine between the last failing grid point and this one
        double lo = i > 0 ? grid[i - 1] : grid[i];
        double hi = grid[i];
        if (i > 0) {
            while (hi - lo > std::max(1.0, 5e-3 * hi)) {
                const double mid = std::sqrt(lo * hi);
                if (probe(mid).all_below(delta_eps)) hi = mid;
                else lo = mid;
            }
        }
        NscResult res;
        res.n_sc = std::ceil(hi - 1e-9);
        res.at_nsc = probe(hi);
        res.trace = std::move(trace);
        return res;
    }
    throw boundary_not_found("nsc_search: criterion not met in [" +
                                 std::to_string(n_lo) + ", " + std::to_string(n_hi) + "]",
                             std::move(trace));
}

std::vector<BoundaryPoint> boundary_sweep(const std::vector<BoundaryTask>& tasks,
                                          double delta_eps, double n_lo, double n_hi,
                                          int confirm_points,
                                          const SolverSettings& settings, int workers,
                                          int points_per_decade) {
    std::vector<BoundaryPoint> out(tasks.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const auto& t = tasks[i];
            BoundaryPoint& p = out[i];
            p.label = t.label;
            p.c_or_gamma = t.c_or_gamma;
            p.eta_ratio = t.eta_ratio;
            SolverSettings s = settings;
            s.eta_plus = t.eta_plus;
            try {
                auto r = nsc_search(t.base, t.params, delta_eps, n_lo, n_hi,
                                    confirm_points, s, points_per_decade);
                p.n_sc = r.n_sc;
                p.dev = r.at_nsc;
                p.status = "ok";
            } catch (const std::exception& e) {
                p.status = e.what();
            }
        }
    };
    const int nw = std::max(1, workers);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nw) - 1);
    for (int i = 1; i < nw; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return out;
}

}  // namespace cqed
