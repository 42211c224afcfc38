#include "cqed/layout.hpp"

#include <sstream>

namespace cqed {

const char* family_name(Family f) {
    switch (f) {
        case Family::A: return "a";
        case Family::Sm: return "sm";
        case Family::Sz: return "sz";
        case Family::SzA: return "sz_a";
        case Family::SzSm: return "sz_sm";
        case Family::SmAd: return "sm_ad";
        case Family::SpSm: return "sp_sm";
        case Family::SmA: return "sm_a";
        case Family::AdAd: return "ad_ad";
        case Family::AdA: return "ad_a";
        case Family::SzSz: return "sz_sz";
        case Family::SmSm: return "sm_sm";
        case Family::SzAdA: return "sz_ad_a";
        case Family::SmAdA: return "sm_ad_a";
        case Family::SmAdAd: return "sm_ad_ad";
        case Family::SzAA: return "sz_a_a";
        case Family::SmAA: return "sm_a_a";
        case Family::AdAA: return "ad_a_a";
        case Family::AAA: return "a_a_a";
        case Family::SzSzA: return "sz_sz_a";
        case Family::SmSmAd: return "sm_sm_ad";
        case Family::SpSmA: return "sp_sm_a";
        case Family::SzSmAd: return "sz_sm_ad";
        case Family::SzSmA: return "sz_sm_a";
        case Family::SmSmA: return "sm_sm_a";
    }
    return "?";
}

StateLayout build_layout(CumulantOrder order, int l) {
    if (l < 1) throw invalid_parameter("build_layout: l must be >= 1");
    StateLayout lo;
    lo.order = order;
    lo.L = l;

    int n = 0;
    auto cscalar = [&n]() { int o = n; n += 2; return o; };
    auto rscalar = [&n]() { int o = n; n += 1; return o; };
    auto cvec = [&n, l]() { int o = n; n += 2 * l; return o; };
    auto rvec = [&n, l]() { int o = n; n += l; return o; };
    auto cord = [&n, l]() { int o = n; n += 2 * l * l; return o; };
    auto csym = [&n, l]() { int o = n; n += l * (l + 1); return o; };
    auto rsym = [&n, l]() { int o = n; n += l * (l + 1) / 2; return o; };

    lo.off_a = cscalar();
    lo.off_sm = cvec();
    lo.off_sz = rvec();

    if (order != CumulantOrder::CE1) {
        lo.off_sza = cvec();
        lo.off_zsm = cord();
        lo.off_smad = cvec();
        lo.off_spsm = csym();
        lo.off_sma = cvec();
        lo.off_adad = cscalar();
        lo.off_ada = rscalar();
        lo.off_zz = rsym();
        lo.off_smsm = csym();
    }
    if (order == CumulantOrder::CE3) {
        lo.off_szada = rvec();
        lo.off_smada = cvec();
        lo.off_smadad = cvec();
        lo.off_szaa = cvec();
        lo.off_smaa = cvec();
        lo.off_adaa = cscalar();
        lo.off_aaa = cscalar();
        lo.off_zza = csym();
        lo.off_smsmad = csym();
        lo.off_spsma = cord();
        lo.off_zsmad = cord();
        lo.off_zsma = cord();
        lo.off_smsma = csym();
    }
    lo.total_real_count = n;
    return lo;
}

std::vector<VariableRecord> StateLayout::describe() const {
    std::vector<VariableRecord> recs;
    auto cscalar = [&](Family f, int off) { recs.push_back({f, -1, -1, false, off}); };
    auto rscalar = [&](Family f, int off) { recs.push_back({f, -1, -1, true, off}); };
    auto cvec = [&](Family f, int off) {
        for (int k = 0; k < L; ++k) recs.push_back({f, k, -1, false, off + 2 * k});
    };
    auto rvec = [&](Family f, int off) {
        for (int k = 0; k < L; ++k) recs.push_back({f, k, -1, true, off + k});
    };
    auto cord = [&](Family f, int off) {
        for (int k = 0; k < L; ++k)
            for (int j = 0; j < L; ++j)
                recs.push_back({f, k, j, false, off + 2 * (k * L + j)});
    };
    auto csym = [&](Family f, int off) {
        for (int k = 0; k < L; ++k)
            for (int j = k; j < L; ++j)
                recs.push_back({f, k, j, false, off + 2 * sym_index(k, j)});
    };
    auto rsym = [&](Family f, int off) {
        for (int k = 0; k < L; ++k)
            for (int j = k; j < L; ++j)
                recs.push_back({f, k, j, true, off + sym_index(k, j)});
    };

    cscalar(Family::A, off_a);
    cvec(Family::Sm, off_sm);
    rvec(Family::Sz, off_sz);
    if (order != CumulantOrder::CE1) {
        cvec(Family::SzA, off_sza);
        cord(Family::SzSm, off_zsm);
        cvec(Family::SmAd, off_smad);
        csym(Family::SpSm, off_spsm);
        cvec(Family::SmA, off_sma);
        cscalar(Family::AdAd, off_adad);
        rscalar(Family::AdA, off_ada);
        rsym(Family::SzSz, off_zz);
        csym(Family::SmSm, off_smsm);
    }
    if (order == CumulantOrder::CE3) {
        rvec(Family::SzAdA, off_szada);
        cvec(Family::SmAdA, off_smada);
        cvec(Family::SmAdAd, off_smadad);
        cvec(Family::SzAA, off_szaa);
        cvec(Family::SmAA, off_smaa);
        cscalar(Family::AdAA, off_adaa);
        cscalar(Family::AAA, off_aaa);
        csym(Family::SzSzA, off_zza);
        csym(Family::SmSmAd, off_smsmad);
        cord(Family::SpSmA, off_spsma);
        cord(Family::SzSmAd, off_zsmad);
        cord(Family::SzSmA, off_zsma);
        csym(Family::SmSmA, off_smsma);
    }
    return recs;
}

std::string StateLayout::describe_csv() const {
    std::ostringstream os;
    os << "family,mu,nu,kind,offset\n";
    for (const auto& r : describe()) {
        os << family_name(r.family) << ',' << r.mu << ',' << r.nu << ','
           << (r.real ? "real" : "complex") << ',' << r.offset << '\n';
    }
    return os.str();
}

Vec initial_state(const StateLayout& layout, const std::vector<double>& sz0) {
    if (static_cast<int>(sz0.size()) != layout.L)
        throw invalid_parameter("initial_state: sz0 size must equal cluster count");
    for (double v : sz0)
        if (!(v >= -1.0 && v <= 0.0))
            throw invalid_parameter("initial_state: sz0 values must lie in [-1, 0]");

    Vec x = Vec::Zero(layout.total_real_count);
    MutableStateView w(layout, x);
    for (int k = 0; k < layout.L; ++k) w.set_sz(k, sz0[k]);
    if (layout.order != CumulantOrder::CE1) {
        // factorized pair moments; everything with an odd number of cavity or
        // lowering operators stays zero
        for (int k = 0; k < layout.L; ++k)
            for (int j = k; j < layout.L; ++j) w.set_zz(k, j, sz0[k] * sz0[j]);
    }
    return x;
}

Vec initial_state(const StateLayout& layout, double sz0) {
    return initial_state(layout, std::vector<double>(layout.L, sz0));
}

}  // namespace cqed
