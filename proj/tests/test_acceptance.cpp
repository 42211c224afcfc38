// Acceptance suite: one pass/fail line per criterion, exit code equals the
// number of failed criteria. Runtime is dominated by the broadened-ensemble
// boundary rows (criterion 10) and the below-critical searches (8, 9);
// expect roughly 10-15 minutes in Release.
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cqed/analysis.hpp"
#include "cqed/io.hpp"
#include "cqed/oracle.hpp"
#include "cqed/semiclassical.hpp"

using namespace cqed;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

struct System {
    ClusterEnsemble ensemble;
    PhysicalParams params;
    double n0 = 0.0;
    double eta_ref = 0.0;
};

System make_system(double c, double n, double ratio) {
    System s;
    s.params = PhysicalParams::reference();
    const double g = std::sqrt(c * s.params.kappa * s.params.gamma_h / n);
    s.ensemble = ClusterEnsemble::homogeneous(n, g);
    s.n0 = saturation_photon_number(g, s.params.gamma_h);
    auto crit = critical_drives(c, s.n0, s.params.kappa);
    s.eta_ref = crit.eta_ref();
    s.params.eta = ratio * s.eta_ref;
    return s;
}

double horizon(double kappa, double ratio) {
    const double f = std::min(200.0, std::max(1.0, 1.0 / std::abs(1.0 - ratio)));
    return 1e3 / kappa * f;
}

SolverSettings settings_for(const System& s, double ratio) {
    SolverSettings st;
    st.eta_plus = s.eta_ref;
    st.integrator.max_time = horizon(s.params.kappa, ratio);
    return st;
}

NscResult run_nsc(double c, double ratio, double n_ref, double n_lo, double n_hi,
                  int ppd = 12, int confirm = 3) {
    System s = make_system(c, n_ref, ratio);
    return nsc_search(s.ensemble, s.params, 1e-2, n_lo, n_hi, confirm,
                      settings_for(s, ratio), ppd);
}

// Random density matrix with the top Fock levels unpopulated so cutoff
// effects stay below the verification threshold.
Mat random_density(const HilbertConfig& hc, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    const int nc = hc.photon_cutoff + 1, keep = hc.photon_cutoff - 4;
    Mat g = Mat::Zero(hc.dim(), hc.dim());
    for (int r = 0; r < hc.dim(); ++r)
        for (int c = 0; c < hc.dim(); ++c)
            if (r % nc <= keep && c % nc <= keep) g(r, c) = cplx(nd(rng), nd(rng));
    Mat rho = g * g.adjoint();
    rho /= rho.trace().real();
    return rho;
}

// -------------------------------------------------------------------------

void criterion_1() {
    PhysicalParams p = PhysicalParams::reference(0.4 * kTwoPi);
    p.delta_c = 0.2 * kTwoPi;
    p.gamma_p = 0.15 * kTwoPi;
    std::mt19937_64 rng(1234);
    double worst = 0.0;
    int count = 0;
    const std::vector<std::vector<int>> partitions2 = {{1, 1}, {2}};
    const std::vector<std::vector<int>> partitions3 = {{1, 1, 1}, {2, 1}};
    for (const auto* parts : {&partitions2, &partitions3}) {
        for (const auto& part : *parts) {
            std::vector<SpinMode> modes;
            for (std::size_t c = 0; c < part.size(); ++c)
                for (int i = 0; i < part[c]; ++i)
                    modes.push_back(
                        {c == 0 ? 0.0 : 0.5 * kTwoPi * static_cast<double>(c),
                         (0.6 + 0.25 * static_cast<double>(c)) * kTwoPi});
            HilbertConfig hc{p, modes, 10};
            QuantumOracle o(hc);
            for (int trial = 0; trial < 50; ++trial) {
                Mat rho = random_density(hc, rng);
                auto rep = verify_eom(o, rho, CumulantOrder::CE3, part);
                worst = std::max(worst, rep.max_residual());
                ++count;
            }
        }
    }
    std::ostringstream os;
    os << "equation residuals vs exact solver: max " << worst << " over " << count
       << " random states (threshold 1e-8)";
    report(1, worst < 1e-8, os.str());
}

void criterion_2() {
    bool ok = true;
    std::ostringstream os;
    os << "tracked-variable totals:";
    for (int l : {1, 2, 5, 51}) {
        const int expect = 13 * l * l + l * (l + 1) / 2 + 23 * l + 9;
        const int got = build_layout(CumulantOrder::CE3, l).total_real_count;
        ok = ok && got == expect;
        os << " L=" << l << ":" << got << "/" << expect;
    }
    report(2, ok, os.str());
}

void criterion_3() {
    bool flip = !is_bistable(8.0 - 1e-9) && !is_bistable(8.0) && is_bistable(8.0 + 1e-9);
    for (double c = 0.5; c <= 20.0; c += 0.25)
        flip = flip && (is_bistable(c) == (c > 8.0));
    double worst = 0.0;
    for (double n0 : {0.25, 1.0, 4.0}) {
        auto crit = critical_drives(8.0, n0, 1.7);
        worst = std::max(worst, std::abs(crit.x_at_max_slope - 3.0 * n0) / (3.0 * n0));
    }
    std::ostringstream os;
    os << "bistability flips at C=8, merged turning point at x=3n0 (residual " << worst
       << ")";
    report(3, flip && worst < 1e-9, os.str());
}

void criterion_4() {
    System base = make_system(14.0, 10.0, 1.05);
    SolverSettings st;
    st.eta_plus = base.eta_ref;
    st.integrator.rtol = 1e-10;
    st.integrator.atol = 1e-13;
    st.integrator.ss_rel_tol = 1e-11;
    st.integrator.max_time = 5000.0;
    std::vector<double> xn;
    for (double n : {10.0, 100.0, 1000.0}) {
        auto [e, p] = scale_ensemble(base.ensemble, base.params, n);
        xn.push_back(stationary_photon(CumulantOrder::CE1, e, p, st) / n);
    }
    const double spread =
        (std::max({xn[0], xn[1], xn[2]}) - std::min({xn[0], xn[1], xn[2]})) / xn[0];
    std::ostringstream os;
    os << "ce1 |<a>|^2/N invariant under rescaling at C=14: spread " << spread
       << " (threshold 1e-10)";
    report(4, spread < 1e-10, os.str());
}

// Stationary response from the unexcited state, classified against the
// mean-field upper branch. Returns true when the system settles high.
bool settles_high(CumulantOrder order, double c, double n, double ratio) {
    System s = make_system(c, n, ratio);
    CumulantEom eom(order, s.ensemble, s.params);
    IntegratorConfig cfg;
    cfg.max_time = horizon(s.params.kappa, ratio);
    auto res = find_stationary(eom, initial_state(eom.layout(), -1.0), cfg);
    if (res.outcome.kind != OutcomeKind::Stationary)
        throw no_convergence("crossover probe did not settle", 0.0);
    StateView v(eom.layout(), res.state);
    const double x = std::norm(v.a());
    auto roots = homogeneous_steady_states(c, s.n0, s.params.eta, s.params.kappa);
    return x > 0.5 * roots.back().x;
}

// Smallest integer N in [lo, hi] that settles high; lo must settle low.
int crossover_n(CumulantOrder order, double c, double ratio, int lo, int hi) {
    if (settles_high(order, c, lo, ratio) || !settles_high(order, c, hi, ratio))
        throw no_convergence("crossover not bracketed", 0.0);
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (settles_high(order, c, mid, ratio) ? hi : lo) = mid;
    }
    return hi;
}

void criterion_5() {
    std::ostringstream os;
    bool ok = false;
    try {
        const int n_high = crossover_n(CumulantOrder::CE3, 14.0, 1.05, 5, 150);
        ok = std::abs(n_high - 87) <= 3;
        os << "ce3 low/high crossover at C=14, 1.05 eta+: measured N=" << n_high - 1
           << "/" << n_high << ", required 86/87 within +-3 spins";
    } catch (const std::exception& e) {
        os << "ce3 crossover probe failed: " << e.what();
    }
    report(5, ok, os.str());
}

void criterion_6() {
    std::ostringstream os;
    bool ok = false;
    try {
        const int n_high = crossover_n(CumulantOrder::CE2, 14.0, 1.05, 5, 150);
        ok = std::abs(n_high - 45) <= 10;
        os << "ce2 normalized amplitude jumps to ~1 at N=" << n_high
           << ", required near 45 within +-10 spins";
    } catch (const std::exception& e) {
        os << "ce2 jump probe failed: " << e.what();
    }
    report(6, ok, os.str());
}

void criterion_7() {
    std::vector<double> logn, logd;
    for (int i = 0; i <= 6; ++i) {
        const double n = 100.0 * std::pow(10.0, i / 6.0);
        System s = make_system(14.0, n, 1.05);
        SolverSettings st = settings_for(s, 1.05);
        const double x1 = stationary_photon(CumulantOrder::CE1, s.ensemble, s.params, st);
        const double x2 = stationary_photon(CumulantOrder::CE2, s.ensemble, s.params, st);
        logn.push_back(std::log(n));
        logd.push_back(std::log(std::abs(x1 - x2) / x2));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(logn.size());
    for (std::size_t i = 0; i < logn.size(); ++i) {
        sx += logn[i];
        sy += logd[i];
        sxx += logn[i] * logn[i];
        sxy += logn[i] * logd[i];
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    std::ostringstream os;
    os << "d12 vs N above the crossover at C=14: log-log slope " << slope
       << " (required -1 +- 0.1)";
    report(7, std::abs(slope + 1.0) < 0.1, os.str());
}

void criterion_8() {
    std::ostringstream os;
    bool ok_above = false, ok_below = false;
    double n_above = 0.0, n_below = 0.0;
    try {
        n_above = run_nsc(18.0, 1.01, 500.0, 300.0, 750.0).n_sc;
        ok_above = n_above >= 500.0 / 1.5 && n_above <= 500.0 * 1.5;
    } catch (const std::exception&) {
    }
    try {
        n_below = run_nsc(18.0, 0.99, 3000.0, 1000.0, 45000.0).n_sc;
        ok_below = n_below >= 3e4 / 1.5 && n_below <= 3e4 * 1.5;
    } catch (const std::exception&) {
    }
    os << "C=18 boundary anchors: N_sc(1.01 eta+)=" << n_above
       << " (required ~500 within x1.5), N_sc(0.99 eta+)=" << n_below
       << " (required ~3e4 within x1.5)";
    report(8, ok_above && ok_below, os.str());
}

void criterion_9() {
    std::ostringstream os;
    bool ok = true;
    try {
        os << "C=5 mirrored ratios";
        for (double d : {0.05, 0.10, 0.20}) {
            const double above = run_nsc(5.0, 1.0 + d, 200.0, 2.0, 2000.0).n_sc;
            const double below = run_nsc(5.0, 1.0 - d, 200.0, 2.0, 2000.0).n_sc;
            ok = ok && above > below;
            os << " " << (1.0 + d) << "/" << (1.0 - d) << ":" << above << ">" << below;
        }
        std::vector<double> lo, hi;
        for (double c : {10.0, 14.0, 18.0}) {
            lo.push_back(run_nsc(c, 0.95, 500.0, 50.0, 2000.0).n_sc);
            hi.push_back(run_nsc(c, 1.05, 500.0, 50.0, 3000.0).n_sc);
        }
        ok = ok && lo[0] < lo[1] && lo[1] < lo[2];
        ok = ok && hi[0] > hi[1] && hi[1] > hi[2];
        os << "; below eta+ vs C: " << lo[0] << "<" << lo[1] << "<" << lo[2]
           << "; above eta+ vs C: " << hi[0] << ">" << hi[1] << ">" << hi[2];
    } catch (const std::exception& e) {
        ok = false;
        os << " probe failed: " << e.what();
    }
    report(9, ok, os.str());
}

void criterion_10() {
    PhysicalParams p = PhysicalParams::reference();
    const double n = 1000.0;
    const double g = std::sqrt(18.0 * p.kappa * p.gamma_h / n);
    const double gammas[] = {0.1, 0.5, 1.0};
    const double targets[] = {17.9, 15.8, 12.7};
    // detuning grid documented in the README: 51 clusters over +-2 Gamma
    bool ok_ceff = true;
    std::ostringstream os;
    os << "broadened ensembles (grid span +-2 Gamma): C_eff";
    double ceff[3];
    for (int i = 0; i < 3; ++i) {
        auto e = gaussian_ensemble(n, mhz_to_rad(gammas[i]), g, 51, 2.0);
        ceff[i] = cooperativity(e, p);
        ok_ceff = ok_ceff && std::abs(ceff[i] - targets[i]) < 0.2;
        os << " " << ceff[i] << "/" << targets[i];
    }

    // boundary rows on the coarser 11-cluster grid (same span); ordering must
    // follow the effective cooperativity
    bool ok_order = false;
    double nsc[3] = {0.0, 0.0, 0.0};
    try {
        for (int i = 0; i < 3; ++i) {
            auto base = gaussian_ensemble(n, mhz_to_rad(gammas[i]), g, 11, 2.0);
            auto crit = ensemble_critical_drives(base, p);
            PhysicalParams pr = p;
            pr.eta = 1.05 * crit.eta_ref();
            SolverSettings st;
            st.eta_plus = crit.eta_ref();
            st.integrator.max_time = horizon(p.kappa, 1.05);
            nsc[i] = nsc_search(base, pr, 1e-2, 50.0, 3000.0, 3, st, 12).n_sc;
        }
        ok_order = nsc[0] <= nsc[1] && nsc[1] <= nsc[2];
    } catch (const std::exception& e) {
        os << " row probe failed: " << e.what();
    }
    os << "; N_sc rows (l=11) " << nsc[0] << "<=" << nsc[1] << "<=" << nsc[2];
    report(10, ok_ceff && ok_order, os.str());
}

void criterion_11() {
    std::ostringstream os;
    bool ok = false;
    try {
        // rerun identity on a single search
        auto a = run_nsc(14.0, 1.2, 100.0, 10.0, 500.0, 6, 2);
        auto b = run_nsc(14.0, 1.2, 100.0, 10.0, 500.0, 6, 2);
        const bool rerun = a.n_sc == b.n_sc && a.at_nsc.d12 == b.at_nsc.d12 &&
                           a.at_nsc.d23 == b.at_nsc.d23 && a.at_nsc.x_ce3 == b.at_nsc.x_ce3;

        // worker-count independence of the parallel sweep
        std::vector<BoundaryTask> tasks;
        for (double c : {12.0, 14.0}) {
            System s = make_system(c, 100.0, 1.2);
            tasks.push_back({format_double(c), c, s.ensemble, s.params, 1.2, s.eta_ref});
        }
        SolverSettings st;
        st.integrator.max_time = horizon(kTwoPi, 1.2);
        auto serialize = [](const std::vector<BoundaryPoint>& pts) {
            std::string out;
            for (const auto& p : pts)
                out += p.label + ',' + format_double(p.n_sc) + ',' +
                       format_double(p.dev.d12) + ',' + format_double(p.dev.d23) + ',' +
                       format_double(p.dev.d13) + ',' + p.status + '\n';
            return out;
        };
        const std::string w1 = serialize(boundary_sweep(tasks, 1e-2, 10.0, 500.0, 2, st, 1, 6));
        const std::string w4 = serialize(boundary_sweep(tasks, 1e-2, 10.0, 500.0, 2, st, 4, 6));
        ok = rerun && w1 == w4;
        os << "determinism: rerun identical " << (rerun ? "yes" : "no")
           << ", workers 1 vs 4 outputs " << (w1 == w4 ? "identical" : "differ");
    } catch (const std::exception& e) {
        os << "determinism probe failed: " << e.what();
    }
    report(11, ok, os.str());
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    std::printf("%d of 11 criteria failed\n", g_failures);
    return g_failures;
}
