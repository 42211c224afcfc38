#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "cqed/model.hpp"

namespace cqed {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;

// Moment families tracked by the cumulant hierarchy. Pair-indexed families
// always refer to two distinct spins; the (mu,mu) diagonal means two distinct
// spins inside cluster mu.
//
// Storage kinds:
//   scalar / per-cluster, complex (2 real slots) or real (1 slot)
//   ordered pairs: full LxL table (the two indices play different roles)
//   symmetric pairs: mu <= nu only
//   spsm <sk+ sj-> is stored for mu <= nu; the reversed order is its conjugate.
enum class Family {
    A,       // <a>           complex scalar
    Sm,      // <s->          complex per cluster
    Sz,      // <sz>          real per cluster
    SzA,     // <sz a>        complex per cluster
    SzSm,    // <sz s->       complex ordered pair
    SmAd,    // <s- ad>       complex per cluster
    SpSm,    // <s+ s->       complex symmetric pair (conjugate-paired)
    SmA,     // <s- a>        complex per cluster
    AdAd,    // <ad ad>       complex scalar
    AdA,     // <ad a>        real scalar
    SzSz,    // <sz sz>       real symmetric pair
    SmSm,    // <s- s->       complex symmetric pair
    SzAdA,   // <sz ad a>     real per cluster
    SmAdA,   // <s- ad a>     complex per cluster
    SmAdAd,  // <s- ad ad>    complex per cluster
    SzAA,    // <sz a a>      complex per cluster
    SmAA,    // <s- a a>      complex per cluster
    AdAA,    // <ad a a>      complex scalar
    AAA,     // <a a a>       complex scalar
    SzSzA,   // <sz sz a>     complex symmetric pair
    SmSmAd,  // <s- s- ad>    complex symmetric pair
    SpSmA,   // <s+ s- a>     complex ordered pair
    SzSmAd,  // <sz s- ad>    complex ordered pair
    SzSmA,   // <sz s- a>     complex ordered pair
    SmSmA,   // <s- s- a>     complex symmetric pair
};

const char* family_name(Family f);

struct VariableRecord {
    Family family;
    int mu;       // -1 for cavity-only variables
    int nu;       // -1 unless pair-indexed
    bool real;    // true if stored in one real slot
    int offset;   // first real slot in the flat state array
};

/// Index map from (family, cluster indices) to offsets in the flat real
/// state array of a given closure order.
struct StateLayout {
    CumulantOrder order;
    int L = 0;
    int total_real_count = 0;

    // Offsets of each family's block, -1 when the family is not tracked.
    int off_a = -1, off_sm = -1, off_sz = -1;
    int off_sza = -1, off_zsm = -1, off_smad = -1, off_spsm = -1, off_sma = -1;
    int off_adad = -1, off_ada = -1, off_zz = -1, off_smsm = -1;
    int off_szada = -1, off_smada = -1, off_smadad = -1, off_szaa = -1, off_smaa = -1;
    int off_adaa = -1, off_aaa = -1;
    int off_zza = -1, off_smsmad = -1, off_spsma = -1, off_zsmad = -1, off_zsma = -1,
        off_smsma = -1;

    int sym_count() const { return L * (L + 1) / 2; }

    // k <= j required.
    int sym_index(int k, int j) const { return k * L - k * (k - 1) / 2 + (j - k); }

    std::vector<VariableRecord> describe() const;
    std::string describe_csv() const;
};

StateLayout build_layout(CumulantOrder order, int l);

/// Fully factorized (zero-cumulant) state: empty cavity, <sz_mu> = sz0[mu].
Vec initial_state(const StateLayout& layout, const std::vector<double>& sz0);
Vec initial_state(const StateLayout& layout, double sz0);

// ---------------------------------------------------------------------------
// Read access to a flat state (or derivative) array through a layout.
// Swapped-index reads of symmetric and conjugate-paired families are resolved
// here so equation code can use arbitrary (k,j).
class StateView {
  public:
    StateView(const StateLayout& layout, const double* data)
        : lo_(layout), d_(data) {}
    StateView(const StateLayout& layout, const Vec& v) : lo_(layout), d_(v.data()) {}

    const StateLayout& layout() const { return lo_; }

    cplx a() const { return at(lo_.off_a); }
    cplx sm(int k) const { return at(lo_.off_sm + 2 * k); }
    double sz(int k) const { return d_[lo_.off_sz + k]; }

    cplx sza(int k) const { return at(lo_.off_sza + 2 * k); }
    cplx zsm(int k, int j) const { return at(lo_.off_zsm + 2 * (k * lo_.L + j)); }
    cplx smad(int k) const { return at(lo_.off_smad + 2 * k); }
    cplx spsm(int k, int j) const {
        return k <= j ? at(lo_.off_spsm + 2 * lo_.sym_index(k, j))
                      : std::conj(at(lo_.off_spsm + 2 * lo_.sym_index(j, k)));
    }
    cplx sma(int k) const { return at(lo_.off_sma + 2 * k); }
    cplx adad() const { return at(lo_.off_adad); }
    double ada() const { return d_[lo_.off_ada]; }
    double zz(int k, int j) const {
        return k <= j ? d_[lo_.off_zz + lo_.sym_index(k, j)]
                      : d_[lo_.off_zz + lo_.sym_index(j, k)];
    }
    cplx smsm(int k, int j) const { return sym_at(lo_.off_smsm, k, j); }

    double szada(int k) const { return d_[lo_.off_szada + k]; }
    cplx smada(int k) const { return at(lo_.off_smada + 2 * k); }
    cplx smadad(int k) const { return at(lo_.off_smadad + 2 * k); }
    cplx szaa(int k) const { return at(lo_.off_szaa + 2 * k); }
    cplx smaa(int k) const { return at(lo_.off_smaa + 2 * k); }
    cplx adaa() const { return at(lo_.off_adaa); }
    cplx aaa() const { return at(lo_.off_aaa); }
    cplx zza(int k, int j) const { return sym_at(lo_.off_zza, k, j); }
    cplx smsmad(int k, int j) const { return sym_at(lo_.off_smsmad, k, j); }
    cplx spsma(int k, int j) const { return at(lo_.off_spsma + 2 * (k * lo_.L + j)); }
    cplx zsmad(int k, int j) const { return at(lo_.off_zsmad + 2 * (k * lo_.L + j)); }
    cplx zsma(int k, int j) const { return at(lo_.off_zsma + 2 * (k * lo_.L + j)); }
    cplx smsma(int k, int j) const { return sym_at(lo_.off_smsma, k, j); }

  private:
    cplx at(int off) const { return {d_[off], d_[off + 1]}; }
    cplx sym_at(int off, int k, int j) const {
        return k <= j ? at(off + 2 * lo_.sym_index(k, j)) : at(off + 2 * lo_.sym_index(j, k));
    }

    const StateLayout& lo_;
    const double* d_;
};

/// Write access for stored slots only (mu <= nu for symmetric families).
class MutableStateView {
  public:
    MutableStateView(const StateLayout& layout, double* data) : lo_(layout), d_(data) {}
    MutableStateView(const StateLayout& layout, Vec& v) : lo_(layout), d_(v.data()) {}

    void set_a(cplx v) { put(lo_.off_a, v); }
    void set_sm(int k, cplx v) { put(lo_.off_sm + 2 * k, v); }
    void set_sz(int k, double v) { d_[lo_.off_sz + k] = v; }
    void set_sza(int k, cplx v) { put(lo_.off_sza + 2 * k, v); }
    void set_zsm(int k, int j, cplx v) { put(lo_.off_zsm + 2 * (k * lo_.L + j), v); }
    void set_smad(int k, cplx v) { put(lo_.off_smad + 2 * k, v); }
    void set_spsm(int k, int j, cplx v) { put(lo_.off_spsm + 2 * lo_.sym_index(k, j), v); }
    void set_sma(int k, cplx v) { put(lo_.off_sma + 2 * k, v); }
    void set_adad(cplx v) { put(lo_.off_adad, v); }
    void set_ada(double v) { d_[lo_.off_ada] = v; }
    void set_zz(int k, int j, double v) { d_[lo_.off_zz + lo_.sym_index(k, j)] = v; }
    void set_smsm(int k, int j, cplx v) { put(lo_.off_smsm + 2 * lo_.sym_index(k, j), v); }
    void set_szada(int k, double v) { d_[lo_.off_szada + k] = v; }
    void set_smada(int k, cplx v) { put(lo_.off_smada + 2 * k, v); }
    void set_smadad(int k, cplx v) { put(lo_.off_smadad + 2 * k, v); }
    void set_szaa(int k, cplx v) { put(lo_.off_szaa + 2 * k, v); }
    void set_smaa(int k, cplx v) { put(lo_.off_smaa + 2 * k, v); }
    void set_adaa(cplx v) { put(lo_.off_adaa, v); }
    void set_aaa(cplx v) { put(lo_.off_aaa, v); }
    void set_zza(int k, int j, cplx v) { put(lo_.off_zza + 2 * lo_.sym_index(k, j), v); }
    void set_smsmad(int k, int j, cplx v) { put(lo_.off_smsmad + 2 * lo_.sym_index(k, j), v); }
    void set_spsma(int k, int j, cplx v) { put(lo_.off_spsma + 2 * (k * lo_.L + j), v); }
    void set_zsmad(int k, int j, cplx v) { put(lo_.off_zsmad + 2 * (k * lo_.L + j), v); }
    void set_zsma(int k, int j, cplx v) { put(lo_.off_zsma + 2 * (k * lo_.L + j), v); }
    void set_smsma(int k, int j, cplx v) { put(lo_.off_smsma + 2 * lo_.sym_index(k, j), v); }

  private:
    void put(int off, cplx v) {
        d_[off] = v.real();
        d_[off + 1] = v.imag();
    }

    const StateLayout& lo_;
    double* d_;
};

}  // namespace cqed
