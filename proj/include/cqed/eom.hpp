#pragma once

#include <complex>
#include <vector>

#include "cqed/closures.hpp"
#include "cqed/layout.hpp"
#include "cqed/model.hpp"

// Right-hand side of the coupled moment equations. The hierarchy couples each
// tracked moment to moments one order higher; those are supplied by policy
// objects so the same equation code serves the production closures and the
// exact-moment verification path:
//
//   ThirdSource  - third-order moments entering first/second-order equations
//                  (tracked reads for CE3, zero-third-cumulant closure for CE2)
//   FourthSource - fourth-order moments entering third-order equations
//   TripleSpinSource - collective sums of three-spin moments, weighted by
//                  cluster multiplicities with the k,j spins excluded
//
// Cluster sums over j != k carry weight M_nu, reduced by one for each of the
// excluded spins that lies in cluster nu. All sums are precomputed once per
// evaluation so a full CE3 evaluation costs O(L^2).

namespace cqed {

struct EomParams {
    double kappa, delta_c, eta, gamma_h, gamma_p;
    std::vector<double> g, delta, M;
    int L = 0;

    static EomParams from(const ClusterEnsemble& e, const PhysicalParams& p) {
        EomParams pp;
        pp.kappa = p.kappa;
        pp.delta_c = p.delta_c;
        pp.eta = p.eta;
        pp.gamma_h = p.gamma_h;
        pp.gamma_p = p.gamma_p;
        pp.L = static_cast<int>(e.size());
        pp.g.reserve(e.size());
        pp.delta.reserve(e.size());
        pp.M.reserve(e.size());
        for (const auto& c : e.clusters) {
            pp.g.push_back(c.g);
            pp.delta.push_back(c.delta);
            pp.M.push_back(c.weight);
        }
        return pp;
    }
};

/// Multiplicity-weighted collective sums, refreshed once per RHS evaluation.
struct CollectiveSums {
    cplx S_sm{}, S_sma{}, S_smada{}, S_smadad{}, S_smaa{};
    double S_im_smad = 0.0;
    std::vector<cplx> Szsm, Spsm_in, Spsm_out, Ssmsm;          // CE2+
    std::vector<cplx> Szsmad, Sspsma_in, Sspsma_out, Ssmsmad,  // CE3
        Szsma, Ssmsma;

    void resize(int L, CumulantOrder order) {
        Szsm.assign(L, {});
        Spsm_in.assign(L, {});
        Spsm_out.assign(L, {});
        Ssmsm.assign(L, {});
        if (order == CumulantOrder::CE3) {
            Szsmad.assign(L, {});
            Sspsma_in.assign(L, {});
            Sspsma_out.assign(L, {});
            Ssmsmad.assign(L, {});
            Szsma.assign(L, {});
            Ssmsma.assign(L, {});
        }
    }
};

inline void compute_collective_sums(const EomParams& pp, const StateView& s,
                                    CumulantOrder order, CollectiveSums& cs) {
    const int L = pp.L;
    cs.S_sm = cs.S_sma = cs.S_smada = cs.S_smadad = cs.S_smaa = cplx{};
    cs.S_im_smad = 0.0;
    for (int k = 0; k < L; ++k) {
        const double gm = pp.g[k] * pp.M[k];
        cs.S_sm += gm * s.sm(k);
        if (order == CumulantOrder::CE1) continue;
        cs.S_sma += gm * s.sma(k);
        cs.S_im_smad += gm * std::imag(s.smad(k));
        cplx szsm{}, pin{}, pout{}, mm{};
        for (int r = 0; r < L; ++r) {
            const double grm = pp.g[r] * pp.M[r];
            szsm += grm * s.zsm(k, r);
            pin += grm * s.spsm(r, k);
            pout += grm * s.spsm(k, r);
            mm += grm * s.smsm(k, r);
        }
        cs.Szsm[k] = szsm;
        cs.Spsm_in[k] = pin;
        cs.Spsm_out[k] = pout;
        cs.Ssmsm[k] = mm;
        if (order == CumulantOrder::CE3) {
            cs.S_smada += gm * s.smada(k);
            cs.S_smadad += gm * s.smadad(k);
            cs.S_smaa += gm * s.smaa(k);
            cplx zsmad{}, spin{}, spout{}, smsmad{}, zsma{}, smsma{};
            for (int r = 0; r < L; ++r) {
                const double grm = pp.g[r] * pp.M[r];
                zsmad += grm * s.zsmad(k, r);
                spin += grm * s.spsma(r, k);
                spout += grm * s.spsma(k, r);
                smsmad += grm * s.smsmad(k, r);
                zsma += grm * s.zsma(k, r);
                smsma += grm * s.smsma(k, r);
            }
            cs.Szsmad[k] = zsmad;
            cs.Sspsma_in[k] = spin;
            cs.Sspsma_out[k] = spout;
            cs.Ssmsmad[k] = smsmad;
            cs.Szsma[k] = zsma;
            cs.Ssmsma[k] = smsma;
        }
    }
}

// ---------------------------------------------------------------------------
// Higher-moment policies.

/// Third-order moments read directly from a CE3 state.
struct TrackedThird {
    StateView s;
    cplx sz_ada(int k) const { return s.szada(k); }
    cplx sm_ada(int k) const { return s.smada(k); }
    cplx sm_adad(int k) const { return s.smadad(k); }
    cplx sz_aa(int k) const { return s.szaa(k); }
    cplx zz_a(int k, int j) const { return s.zza(k, j); }
    cplx smsm_ad(int k, int j) const { return s.smsmad(k, j); }
    cplx spsm_a(int k, int j) const { return s.spsma(k, j); }
    cplx zsm_ad(int k, int j) const { return s.zsmad(k, j); }
    cplx zsm_a(int k, int j) const { return s.zsma(k, j); }
};

/// Third-order moments via the zero-third-cumulant closure (CE2).
struct Close3Third {
    StateView s;
    cplx sz_ada(int k) const {
        return cumulant_close3(s.sz(k), std::conj(s.a()), s.a(),
                               std::conj(s.sza(k)), s.sza(k), s.ada());
    }
    cplx sm_ada(int k) const {
        return cumulant_close3(s.sm(k), std::conj(s.a()), s.a(),
                               s.smad(k), s.sma(k), s.ada());
    }
    cplx sm_adad(int k) const {
        return cumulant_close3(s.sm(k), std::conj(s.a()), std::conj(s.a()),
                               s.smad(k), s.smad(k), s.adad());
    }
    cplx sz_aa(int k) const {
        return cumulant_close3(s.sz(k), s.a(), s.a(), s.sza(k), s.sza(k),
                               std::conj(s.adad()));
    }
    cplx zz_a(int k, int j) const {
        return cumulant_close3(s.sz(k), s.sz(j), s.a(), s.zz(k, j), s.sza(k), s.sza(j));
    }
    cplx smsm_ad(int k, int j) const {
        return cumulant_close3(s.sm(k), s.sm(j), std::conj(s.a()), s.smsm(k, j),
                               s.smad(k), s.smad(j));
    }
    cplx spsm_a(int k, int j) const {
        return cumulant_close3(std::conj(s.sm(k)), s.sm(j), s.a(), s.spsm(k, j),
                               std::conj(s.smad(k)), s.sma(j));
    }
    cplx zsm_ad(int k, int j) const {
        return cumulant_close3(s.sz(k), s.sm(j), std::conj(s.a()), s.zsm(k, j),
                               std::conj(s.sza(k)), s.smad(j));
    }
    cplx zsm_a(int k, int j) const {
        return cumulant_close3(s.sz(k), s.sm(j), s.a(), s.zsm(k, j), s.sza(k), s.sma(j));
    }
};

/// Fourth-order moments via the zero-fourth-cumulant closure (CE3).
struct Close4Fourth {
    StateView s;

    cplx sm_adada(int k) const {  // <s- ad ad a>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(s.sm(k), ad, ad, a,
                               s.smad(k), s.smad(k), s.sma(k), s.adad(), s.ada(), s.ada(),
                               s.smadad(k), s.smada(k), s.smada(k), std::conj(s.adaa()));
    }
    cplx sz_adaa(int k) const {  // <sz ad a a>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(s.sz(k), ad, a, a,
                               std::conj(s.sza(k)), s.sza(k), s.sza(k), s.ada(), s.ada(),
                               std::conj(s.adad()),
                               s.szada(k), s.szada(k), s.szaa(k), s.adaa());
    }
    cplx sz_adada(int k) const {  // <sz ad ad a>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(s.sz(k), ad, ad, a,
                               std::conj(s.sza(k)), std::conj(s.sza(k)), s.sza(k),
                               s.adad(), s.ada(), s.ada(),
                               std::conj(s.szaa(k)), s.szada(k), s.szada(k),
                               std::conj(s.adaa()));
    }
    cplx sm_adaa(int k) const {  // <s- ad a a>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(s.sm(k), ad, a, a,
                               s.smad(k), s.sma(k), s.sma(k), s.ada(), s.ada(),
                               std::conj(s.adad()),
                               s.smada(k), s.smada(k), s.smaa(k), s.adaa());
    }
    cplx sp_aaa(int k) const {  // <s+ a a a>
        const cplx a = s.a(), sp = std::conj(s.sm(k)), spa = std::conj(s.smad(k));
        const cplx aa = std::conj(s.adad());
        return cumulant_close4(sp, a, a, a,
                               spa, spa, spa, aa, aa, aa,
                               std::conj(s.smadad(k)), std::conj(s.smadad(k)),
                               std::conj(s.smadad(k)), s.aaa());
    }
    cplx sz_aaa(int k) const {  // <sz a a a>
        const cplx a = s.a(), aa = std::conj(s.adad());
        return cumulant_close4(s.sz(k), a, a, a,
                               s.sza(k), s.sza(k), s.sza(k), aa, aa, aa,
                               s.szaa(k), s.szaa(k), s.szaa(k), s.aaa());
    }

    cplx zsm_ada(int k, int j) const {  // <sz_k s-_j ad a>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(s.sz(k), s.sm(j), ad, a,
                               s.zsm(k, j), std::conj(s.sza(k)), s.sza(k), s.smad(j),
                               s.sma(j), s.ada(),
                               s.zsmad(k, j), s.zsma(k, j), s.szada(k), s.smada(j));
    }
    cplx zsm_adad(int k, int j) const {  // <sz_k s-_j ad ad>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(s.sz(k), s.sm(j), ad, ad,
                               s.zsm(k, j), std::conj(s.sza(k)), std::conj(s.sza(k)),
                               s.smad(j), s.smad(j), s.adad(),
                               s.zsmad(k, j), s.zsmad(k, j), std::conj(s.szaa(k)),
                               s.smadad(j));
    }
    cplx zsm_aa(int k, int j) const {  // <sz_k s-_j a a>
        const cplx a = s.a();
        return cumulant_close4(s.sz(k), s.sm(j), a, a,
                               s.zsm(k, j), s.sza(k), s.sza(k), s.sma(j), s.sma(j),
                               std::conj(s.adad()),
                               s.zsma(k, j), s.zsma(k, j), s.szaa(k), s.smaa(j));
    }
    cplx zz_ada(int k, int j) const {  // <sz_k sz_j ad a>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(s.sz(k), s.sz(j), ad, a,
                               s.zz(k, j), std::conj(s.sza(k)), s.sza(k),
                               std::conj(s.sza(j)), s.sza(j), s.ada(),
                               std::conj(s.zza(k, j)), s.zza(k, j), s.szada(k),
                               s.szada(j));
    }
    cplx zz_aa(int k, int j) const {  // <sz_k sz_j a a>
        const cplx a = s.a();
        return cumulant_close4(s.sz(k), s.sz(j), a, a,
                               s.zz(k, j), s.sza(k), s.sza(k), s.sza(j), s.sza(j),
                               std::conj(s.adad()),
                               s.zza(k, j), s.zza(k, j), s.szaa(k), s.szaa(j));
    }
    cplx smsm_ada(int k, int j) const {  // <s-_k s-_j ad a>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(s.sm(k), s.sm(j), ad, a,
                               s.smsm(k, j), s.smad(k), s.sma(k), s.smad(j), s.sma(j),
                               s.ada(),
                               s.smsmad(k, j), s.smsma(k, j), s.smada(k), s.smada(j));
    }
    cplx smsm_adad(int k, int j) const {  // <s-_k s-_j ad ad>
        const cplx ad = std::conj(s.a());
        return cumulant_close4(s.sm(k), s.sm(j), ad, ad,
                               s.smsm(k, j), s.smad(k), s.smad(k), s.smad(j), s.smad(j),
                               s.adad(),
                               s.smsmad(k, j), s.smsmad(k, j), s.smadad(k), s.smadad(j));
    }
    cplx spsm_ada(int k, int j) const {  // <s+_k s-_j ad a>
        const cplx a = s.a(), ad = std::conj(a);
        return cumulant_close4(std::conj(s.sm(k)), s.sm(j), ad, a,
                               s.spsm(k, j), std::conj(s.sma(k)), std::conj(s.smad(k)),
                               s.smad(j), s.sma(j), s.ada(),
                               std::conj(s.spsma(j, k)), s.spsma(k, j),
                               std::conj(s.smada(k)), s.smada(j));
    }
    cplx spsm_aa(int k, int j) const {  // <s+_k s-_j a a>
        const cplx a = s.a();
        return cumulant_close4(std::conj(s.sm(k)), s.sm(j), a, a,
                               s.spsm(k, j), std::conj(s.smad(k)), std::conj(s.smad(k)),
                               s.sma(j), s.sma(j), std::conj(s.adad()),
                               s.spsma(k, j), s.spsma(k, j), std::conj(s.smadad(k)),
                               s.smaa(j));
    }
};

/// Collective three-spin sums, closed at third order (Eq.-16-style) and
/// assembled from the precomputed full sums with O(1) corrections for the two
/// excluded spins.
struct ClosedTripleSpin {
    StateView s;
    const EomParams& pp;
    const CollectiveSums& cs;

    cplx G0(int k, int j) const {
        return cs.S_sm - pp.g[k] * s.sm(k) - pp.g[j] * s.sm(j);
    }
    cplx Gz(int kk, int k, int j) const {
        return cs.Szsm[kk] - pp.g[k] * s.zsm(kk, k) - pp.g[j] * s.zsm(kk, j);
    }
    cplx Gp_in(int kk, int k, int j) const {
        return cs.Spsm_in[kk] - pp.g[k] * s.spsm(k, kk) - pp.g[j] * s.spsm(j, kk);
    }
    cplx Gp_out(int kk, int k, int j) const {
        return cs.Spsm_out[kk] - pp.g[k] * s.spsm(kk, k) - pp.g[j] * s.spsm(kk, j);
    }
    cplx Gm(int kk, int k, int j) const {
        return cs.Ssmsm[kk] - pp.g[k] * s.smsm(kk, k) - pp.g[j] * s.smsm(kk, j);
    }

    cplx zz_m(int k, int j) const {  // sum g_m <sz_k sz_j s-_m>
        return (cplx(s.zz(k, j)) - 2.0 * s.sz(k) * s.sz(j)) * G0(k, j)
             + s.sz(j) * Gz(k, k, j) + s.sz(k) * Gz(j, k, j);
    }
    cplx p_mm(int k, int j) const {  // sum g_m <s+_m s-_k s-_j>
        return s.sm(j) * Gp_in(k, k, j) + s.sm(k) * Gp_in(j, k, j)
             + (s.smsm(k, j) - 2.0 * s.sm(k) * s.sm(j)) * std::conj(G0(k, j));
    }
    cplx pm_m(int k, int j) const {  // sum g_m <s+_k s-_j s-_m>
        return (s.spsm(k, j) - 2.0 * std::conj(s.sm(k)) * s.sm(j)) * G0(k, j)
             + s.sm(j) * Gp_out(k, k, j) + std::conj(s.sm(k)) * Gm(j, k, j);
    }
    cplx p_zm(int k, int j) const {  // sum g_m <s+_m sz_k s-_j>
        return s.sm(j) * std::conj(Gz(k, k, j)) + s.sz(k) * Gp_in(j, k, j)
             + (s.zsm(k, j) - 2.0 * s.sz(k) * s.sm(j)) * std::conj(G0(k, j));
    }
    cplx zm_m(int k, int j) const {  // sum g_m <sz_k s-_j s-_m>
        return (s.zsm(k, j) - 2.0 * s.sz(k) * s.sm(j)) * G0(k, j)
             + s.sm(j) * Gz(k, k, j) + s.sz(k) * Gm(j, k, j);
    }
    cplx mm_m(int k, int j) const {  // sum g_m <s-_k s-_j s-_m>
        return (s.smsm(k, j) - 2.0 * s.sm(k) * s.sm(j)) * G0(k, j)
             + s.sm(j) * Gm(k, k, j) + s.sm(k) * Gm(j, k, j);
    }
};

// ---------------------------------------------------------------------------
// Equation families.

constexpr cplx kI{0.0, 1.0};

/// CE1 (Maxwell-Bloch) right-hand side.
inline void eval_ce1(const EomParams& pp, const StateView& s, const CollectiveSums& cs,
                     MutableStateView& out) {
    const cplx a = s.a();
    out.set_a(-(pp.kappa + kI * pp.delta_c) * a - kI * cs.S_sm + pp.eta);
    const double gperp = pp.gamma_h + 2.0 * pp.gamma_p;
    for (int k = 0; k < pp.L; ++k) {
        out.set_sm(k, -(gperp + kI * pp.delta[k]) * s.sm(k) + kI * pp.g[k] * s.sz(k) * a);
        out.set_sz(k, -2.0 * pp.gamma_h * (s.sz(k) + 1.0)
                       - 4.0 * pp.g[k] * std::imag(s.sm(k) * std::conj(a)));
    }
}

/// First- and second-order equation families (shared by CE2 and CE3).
template <class Third>
void eval_low_orders(const EomParams& pp, const StateView& s, const Third& th,
                     const CollectiveSums& cs, MutableStateView& out) {
    const int L = pp.L;
    const double kap = pp.kappa, gh = pp.gamma_h, gp = pp.gamma_p, eta = pp.eta;
    const double dc = pp.delta_c;
    const double gperp = gh + 2.0 * gp;
    const cplx a = s.a();

    out.set_a(-(kap + kI * dc) * a - kI * cs.S_sm + eta);
    out.set_adad(-2.0 * (kap - kI * dc) * s.adad() + 2.0 * kI * std::conj(cs.S_sma)
                 + 2.0 * eta * std::conj(a));
    out.set_ada(-2.0 * kap * s.ada() + 2.0 * cs.S_im_smad + 2.0 * eta * std::real(a));

    for (int k = 0; k < L; ++k) {
        const double gk = pp.g[k];
        out.set_sm(k, -(gperp + kI * pp.delta[k]) * s.sm(k) + kI * gk * s.sza(k));
        out.set_sz(k, -2.0 * gh * (s.sz(k) + 1.0) - 4.0 * gk * std::imag(s.smad(k)));

        const cplx sum_zsm = cs.Szsm[k] - gk * s.zsm(k, k);
        out.set_sza(k, -(kap + 2.0 * gh + kI * dc) * s.sza(k) - 2.0 * gh * a
                        + eta * s.sz(k) - kI * sum_zsm + kI * gk * s.sm(k)
                        + 2.0 * kI * gk * (th.sm_ada(k) - std::conj(th.sm_adad(k))));

        const cplx sum_psm = cs.Spsm_in[k] - gk * s.spsm(k, k);
        out.set_smad(k, -(kap + gperp + kI * (pp.delta[k] - dc)) * s.smad(k)
                         + eta * s.sm(k) + kI * sum_psm
                         + kI * (gk / 2.0) * (s.sz(k) + 1.0) + kI * gk * th.sz_ada(k));

        const cplx sum_mm = cs.Ssmsm[k] - gk * s.smsm(k, k);
        out.set_sma(k, -(kap + gperp + kI * (pp.delta[k] + dc)) * s.sma(k)
                        + eta * s.sm(k) - kI * sum_mm + kI * gk * th.sz_aa(k));
    }

    for (int k = 0; k < L; ++k) {
        const double gk = pp.g[k];
        for (int j = 0; j < L; ++j) {
            const double gj = pp.g[j];
            out.set_zsm(k, j, -(3.0 * gh + 2.0 * gp + kI * pp.delta[j]) * s.zsm(k, j)
                               - 2.0 * gh * s.sm(j) + kI * gj * th.zz_a(k, j)
                               + 2.0 * kI * gk * (th.smsm_ad(k, j) - th.spsm_a(k, j)));
        }
        for (int j = k; j < L; ++j) {
            const double gj = pp.g[j];
            out.set_spsm(k, j, -(2.0 * gh + 4.0 * gp + kI * (pp.delta[j] - pp.delta[k]))
                                   * s.spsm(k, j)
                                - kI * gk * th.zsm_ad(k, j)
                                + kI * gj * std::conj(th.zsm_ad(j, k)));
            out.set_zz(k, j, -2.0 * gh * (s.sz(k) + s.sz(j) + 2.0 * s.zz(k, j))
                              - 4.0 * gk * std::imag(th.zsm_ad(j, k))
                              - 4.0 * gj * std::imag(th.zsm_ad(k, j)));
            out.set_smsm(k, j, -(2.0 * gh + 4.0 * gp + kI * (pp.delta[j] + pp.delta[k]))
                                   * s.smsm(k, j)
                                + kI * gk * th.zsm_a(k, j) + kI * gj * th.zsm_a(j, k));
        }
    }
}

/// Third-order equation families (CE3 only).
template <class Fourth, class Triple>
void eval_third_order(const EomParams& pp, const StateView& s, const Fourth& f4,
                      const Triple& s3, const CollectiveSums& cs, MutableStateView& out) {
    const int L = pp.L;
    const double kap = pp.kappa, gh = pp.gamma_h, gp = pp.gamma_p, eta = pp.eta;
    const double dc = pp.delta_c;

    out.set_adaa(-(3.0 * kap + kI * dc) * s.adaa() - 2.0 * kI * cs.S_smada
                 + kI * std::conj(cs.S_smadad) + 2.0 * eta * s.ada()
                 + eta * std::conj(s.adad()));
    out.set_aaa(-3.0 * (kap + kI * dc) * s.aaa() - 3.0 * kI * cs.S_smaa
                + 3.0 * eta * std::conj(s.adad()));

    for (int k = 0; k < L; ++k) {
        const double gk = pp.g[k];
        const double dk = pp.delta[k];

        const cplx zsmad_sum = cs.Szsmad[k] - gk * s.zsmad(k, k);
        out.set_szada(k, -2.0 * (kap + gh) * s.szada(k) - 2.0 * gh * s.ada()
                          + 2.0 * eta * std::real(s.sza(k)) + 2.0 * std::imag(zsmad_sum)
                          - 2.0 * gk * std::imag(s.smad(k))
                          - 4.0 * gk * std::imag(f4.sm_adada(k)));

        const cplx spsma_in = cs.Sspsma_in[k] - gk * s.spsma(k, k);
        const cplx smsmad_sum = cs.Ssmsmad[k] - gk * s.smsmad(k, k);
        out.set_smada(k, -(2.0 * (kap + gp) + gh + kI * dk) * s.smada(k)
                          + eta * (s.smad(k) + s.sma(k)) + kI * gk * f4.sz_adaa(k)
                          + kI * (spsma_in - smsmad_sum)
                          + kI * (gk / 2.0) * (s.sza(k) + s.a()));

        const cplx spsma_out = cs.Sspsma_out[k] - gk * s.spsma(k, k);
        out.set_smadad(k, -(2.0 * (kap + gp) + gh + kI * (dk - 2.0 * dc)) * s.smadad(k)
                           + 2.0 * eta * s.smad(k) + 2.0 * kI * std::conj(spsma_out)
                           + kI * gk * std::conj(s.sza(k) + s.a())
                           + kI * gk * f4.sz_adada(k));

        const cplx zsma_sum = cs.Szsma[k] - gk * s.zsma(k, k);
        out.set_szaa(k, -2.0 * (kap + gh + kI * dc) * s.szaa(k)
                         - 2.0 * gh * std::conj(s.adad()) + 2.0 * eta * s.sza(k)
                         + 2.0 * kI * gk * s.sma(k) - 2.0 * kI * zsma_sum
                         + 2.0 * kI * gk * (f4.sm_adaa(k) - f4.sp_aaa(k)));

        const cplx smsma_sum = cs.Ssmsma[k] - gk * s.smsma(k, k);
        out.set_smaa(k, -(2.0 * (kap + gp) + gh + kI * (dk + 2.0 * dc)) * s.smaa(k)
                         + 2.0 * eta * s.sma(k) - 2.0 * kI * smsma_sum
                         + kI * gk * f4.sz_aaa(k));
    }

    for (int k = 0; k < L; ++k) {
        const double gk = pp.g[k];
        for (int j = k; j < L; ++j) {
            const double gj = pp.g[j];
            out.set_zza(k, j, -(kap + kI * dc) * s.zza(k, j) + eta * s.zz(k, j)
                               - 2.0 * gh * (s.sza(k) + s.sza(j) + 2.0 * s.zza(k, j))
                               + 2.0 * kI * (gk * f4.zsm_ada(j, k) + gj * f4.zsm_ada(k, j)
                                             - gk * std::conj(f4.zsm_adad(j, k))
                                             - gj * std::conj(f4.zsm_adad(k, j)))
                               - kI * s3.zz_m(k, j) + kI * gk * s.zsm(j, k)
                               + kI * gj * s.zsm(k, j));
            out.set_smsmad(k, j, -(kap + 2.0 * gh + 4.0 * gp
                                    + kI * (pp.delta[k] + pp.delta[j] - dc)) * s.smsmad(k, j)
                                  + eta * s.smsm(k, j) + kI * s3.p_mm(k, j)
                                  + kI * (gk / 2.0) * (s.sm(j) + s.zsm(k, j))
                                  + kI * (gj / 2.0) * (s.sm(k) + s.zsm(j, k))
                                  + kI * gk * f4.zsm_ada(k, j)
                                  + kI * gj * f4.zsm_ada(j, k));
            out.set_smsma(k, j, -(kap + 2.0 * gh + 4.0 * gp
                                   + kI * (pp.delta[k] + pp.delta[j] + dc)) * s.smsma(k, j)
                                 + eta * s.smsm(k, j) - kI * s3.mm_m(k, j)
                                 + kI * gk * f4.zsm_aa(k, j) + kI * gj * f4.zsm_aa(j, k));
        }
        for (int j = 0; j < L; ++j) {
            const double gj = pp.g[j];
            out.set_spsma(k, j, -(kap + 2.0 * gh + 4.0 * gp
                                   + kI * (pp.delta[j] - pp.delta[k] + dc)) * s.spsma(k, j)
                                 + eta * s.spsm(k, j) - kI * s3.pm_m(k, j)
                                 - kI * (gk / 2.0) * (s.sm(j) + s.zsm(k, j))
                                 - kI * gk * f4.zsm_ada(k, j)
                                 + kI * gj * std::conj(f4.zsm_adad(j, k)));
            out.set_zsmad(k, j, -(kap + 3.0 * gh + 2.0 * gp + kI * (pp.delta[j] - dc))
                                    * s.zsmad(k, j)
                                 - 2.0 * gh * s.smad(j) + eta * s.zsm(k, j)
                                 + kI * s3.p_zm(k, j) - kI * gk * s.spsm(k, j)
                                 + kI * (gj / 2.0) * (s.sz(k) + s.zz(k, j))
                                 + kI * gj * f4.zz_ada(k, j)
                                 + 2.0 * kI * gk * (f4.smsm_adad(k, j) - f4.spsm_ada(k, j)));
            out.set_zsma(k, j, -(kap + 3.0 * gh + 2.0 * gp + kI * (pp.delta[j] + dc))
                                   * s.zsma(k, j)
                                - 2.0 * gh * s.sma(j) + eta * s.zsm(k, j)
                                - kI * s3.zm_m(k, j) + kI * gk * s.smsm(k, j)
                                + kI * gj * f4.zz_aa(k, j)
                                + 2.0 * kI * gk * (f4.smsm_ada(k, j) - f4.spsm_aa(k, j)));
        }
    }
}

// ---------------------------------------------------------------------------

/// Production RHS of the moment hierarchy at a given closure order.
/// One instance per integration; the collective-sum scratch is instance-local.
class CumulantEom {
  public:
    CumulantEom(CumulantOrder order, const ClusterEnsemble& ensemble,
                const PhysicalParams& params)
        : lo_(build_layout(order, static_cast<int>(ensemble.size()))),
          pp_(EomParams::from(ensemble, params)) {
        ensemble.validate();
        params.validate();
        cs_.resize(pp_.L, order);
    }

    const StateLayout& layout() const { return lo_; }
    const EomParams& params() const { return pp_; }

    void rhs(const Vec& x, Vec& dx) {
        if (x.size() != lo_.total_real_count)
            throw invalid_parameter("CumulantEom::rhs: state/layout mismatch");
        dx.resize(lo_.total_real_count);
        StateView s(lo_, x);
        MutableStateView out(lo_, dx);
        compute_collective_sums(pp_, s, lo_.order, cs_);
        switch (lo_.order) {
            case CumulantOrder::CE1:
                eval_ce1(pp_, s, cs_, out);
                break;
            case CumulantOrder::CE2: {
                Close3Third th{s};
                eval_low_orders(pp_, s, th, cs_, out);
                break;
            }
            case CumulantOrder::CE3: {
                TrackedThird th{s};
                eval_low_orders(pp_, s, th, cs_, out);
                Close4Fourth f4{s};
                ClosedTripleSpin s3{s, pp_, cs_};
                eval_third_order(pp_, s, f4, s3, cs_, out);
                break;
            }
        }
    }

  private:
    StateLayout lo_;
    EomParams pp_;
    CollectiveSums cs_;
};

}  // namespace cqed
