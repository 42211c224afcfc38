#include "cqed/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cqed/eom.hpp"

namespace cqed {

void HilbertConfig::validate() const {
    params.validate();
    if (spins.empty() || n_spins() > 4)
        throw invalid_parameter("HilbertConfig: 1..4 spins supported");
    if (photon_cutoff < 1) throw invalid_parameter("HilbertConfig: photon_cutoff < 1");
    if (dim() > 4096) throw invalid_parameter("HilbertConfig: dimension exceeds 4096");
    for (const auto& s : spins)
        if (!std::isfinite(s.delta) || !std::isfinite(s.g))
            throw invalid_parameter("HilbertConfig: spin fields must be finite");
}

namespace {

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Single-spin operators; basis index 0 = ground, 1 = excited.
Mat pauli(char which) {
    Mat m = Mat::Zero(2, 2);
    switch (which) {
        case 'z': m(0, 0) = -1.0; m(1, 1) = 1.0; break;
        case 'p': m(1, 0) = 1.0; break;
        case 'm': m(0, 1) = 1.0; break;
    }
    return m;
}

}  // namespace

QuantumOracle::QuantumOracle(HilbertConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int n = cfg_.n_spins();
    const int nc = cfg_.photon_cutoff + 1;

    Mat a = Mat::Zero(nc, nc);
    for (int m = 1; m < nc; ++m) a(m - 1, m) = std::sqrt(static_cast<double>(m));

    auto embed_spin = [&](int j, const Mat& sop) {
        Mat acc = Mat::Identity(1, 1);
        for (int i = 0; i < n; ++i)
            acc = kron(acc, i == j ? sop : Mat::Identity(2, 2));
        return kron(acc, Mat::Identity(nc, nc));
    };
    Mat spins_id = Mat::Identity(1 << n, 1 << n);
    cache_["a"] = kron(spins_id, a);
    cache_["ad"] = kron(spins_id, Mat(a.adjoint()));
    for (int j = 0; j < n; ++j) {
        cache_["sz" + std::to_string(j)] = embed_spin(j, pauli('z'));
        cache_["sp" + std::to_string(j)] = embed_spin(j, pauli('p'));
        cache_["sm" + std::to_string(j)] = embed_spin(j, pauli('m'));
    }

    const Mat& A = cache_["a"];
    const Mat& Ad = cache_["ad"];
    h_ = cfg_.params.delta_c * Ad * A + cplx(0.0, cfg_.params.eta) * (Ad - A);
    for (int j = 0; j < n; ++j) {
        const auto& s = cfg_.spins[j];
        h_ += 0.5 * s.delta * op("sz" + std::to_string(j));
        h_ += s.g * (Ad * op("sm" + std::to_string(j)) + A * op("sp" + std::to_string(j)));
    }
}

const Mat& QuantumOracle::op(const std::string& token) const {
    auto it = cache_.find(token);
    if (it == cache_.end())
        throw invalid_parameter("QuantumOracle: unknown operator token '" + token + "'");
    return it->second;
}

Mat QuantumOracle::liouvillian_apply(const Mat& rho) const {
    if (rho.rows() != cfg_.dim() || rho.cols() != cfg_.dim())
        throw invalid_parameter("liouvillian_apply: dimension mismatch");
    const Mat& A = op("a");
    const Mat& Ad = op("ad");
    const double kap = cfg_.params.kappa, gp = cfg_.params.gamma_p, gh = cfg_.params.gamma_h;

    Mat out = cplx(0.0, -1.0) * (h_ * rho - rho * h_);
    Mat n_op = Ad * A;
    out += kap * (2.0 * A * rho * Ad - n_op * rho - rho * n_op);
    for (int j = 0; j < cfg_.n_spins(); ++j) {
        const Mat& sz = op("sz" + std::to_string(j));
        const Mat& sp = op("sp" + std::to_string(j));
        const Mat& sm = op("sm" + std::to_string(j));
        if (gp > 0.0) out += gp * (sz * rho * sz - rho);
        Mat pm = sp * sm;
        out += gh * (2.0 * sm * rho * sp - pm * rho - rho * pm);
    }
    return out;
}

std::vector<Mat> QuantumOracle::evolve_density(const Mat& rho0,
                                               const std::vector<double>& t_grid,
                                               const IntegratorConfig& cfg) const {
    const int d = cfg_.dim();
    if (rho0.rows() != d || rho0.cols() != d)
        throw invalid_parameter("evolve_density: dimension mismatch");

    auto pack = [d](const Mat& m, Vec& v) {
        v.resize(2 * d * d);
        for (int c = 0, i = 0; c < d; ++c)
            for (int r = 0; r < d; ++r, i += 2) {
                v[i] = m(r, c).real();
                v[i + 1] = m(r, c).imag();
            }
    };
    auto unpack = [d](const Vec& v) {
        Mat m(d, d);
        for (int c = 0, i = 0; c < d; ++c)
            for (int r = 0; r < d; ++r, i += 2) m(r, c) = {v[i], v[i + 1]};
        return m;
    };

    Vec v0;
    pack(rho0, v0);
    Mat scratch;
    Vec packed;
    auto rhs = [&, this](const Vec& x, Vec& dx) {
        scratch = liouvillian_apply(unpack(x));
        pack(scratch, dx);
    };
    IntegratorConfig icfg = cfg;
    if (icfg.max_step <= 0.0) icfg.max_step = 1.0 / (10.0 * cfg_.params.kappa);
    auto traj = evolve(rhs, v0, icfg, t_grid);

    const int n = cfg_.n_spins();
    const int nc = cfg_.photon_cutoff + 1;
    std::vector<Mat> out;
    out.reserve(traj.size());
    for (const auto& pt : traj) {
        Mat rho = unpack(pt.state);
        if (std::abs(rho.trace().real() - 1.0) > 1e-10 ||
            std::abs(rho.trace().imag()) > 1e-10)
            throw truncation_error("evolve_density: trace drift at t=" +
                                   std::to_string(pt.t));
        if ((rho - Mat(rho.adjoint())).cwiseAbs().maxCoeff() > 1e-10)
            throw truncation_error("evolve_density: hermiticity loss at t=" +
                                   std::to_string(pt.t));
        double top = 0.0;
        for (int s = 0; s < (1 << n); ++s)
            top += rho(s * nc + nc - 1, s * nc + nc - 1).real();
        if (top > 1e-8)
            throw truncation_error(
                "evolve_density: Fock cutoff too small (top population " +
                std::to_string(top) + "); increase photon_cutoff");
        out.push_back(std::move(rho));
    }
    return out;
}

cplx QuantumOracle::expectation(const Mat& rho, const std::vector<std::string>& spec) const {
    Mat o = Mat::Identity(cfg_.dim(), cfg_.dim());
    for (const auto& tok : spec) o = o * op(tok);
    return (o * rho).trace();
}

Mat QuantumOracle::vacuum() const {
    Mat rho = Mat::Zero(cfg_.dim(), cfg_.dim());
    rho(0, 0) = 1.0;
    return rho;
}

Mat QuantumOracle::swap_operator(int p, int q) const {
    const int n = cfg_.n_spins();
    const int nc = cfg_.photon_cutoff + 1;
    if (p < 0 || q < 0 || p >= n || q >= n)
        throw invalid_parameter("swap_operator: spin index out of range");
    const int bp = n - 1 - p, bq = n - 1 - q;  // spin 0 is the most significant bit
    Mat s = Mat::Zero(cfg_.dim(), cfg_.dim());
    for (int b = 0; b < (1 << n); ++b) {
        const int vp = (b >> bp) & 1, vq = (b >> bq) & 1;
        int b2 = b & ~(1 << bp) & ~(1 << bq);
        b2 |= vp << bq;
        b2 |= vq << bp;
        for (int m = 0; m < nc; ++m) s(b2 * nc + m, b * nc + m) = 1.0;
    }
    return s;
}

// ---------------------------------------------------------------------------
// verify_eom

double VerifyReport::max_residual() const {
    double m = 0.0;
    for (const auto& r : residuals) m = std::max(m, r.residual);
    return m;
}

std::string VerifyReport::to_csv() const {
    std::ostringstream os;
    os << "family,mu,nu,residual\n";
    for (const auto& r : residuals)
        os << family_name(r.family) << ',' << r.mu << ',' << r.nu << ',' << r.residual
           << '\n';
    for (const auto& s : skipped) os << s << ",,,skipped\n";
    return os.str();
}

namespace {

int family_order(Family f) {
    switch (f) {
        case Family::A:
        case Family::Sm:
        case Family::Sz: return 1;
        case Family::SzA:
        case Family::SzSm:
        case Family::SmAd:
        case Family::SpSm:
        case Family::SmA:
        case Family::AdAd:
        case Family::AdA:
        case Family::SzSz:
        case Family::SmSm: return 2;
        default: return 3;
    }
}

std::string tk(const char* kind, int spin) { return kind + std::to_string(spin); }

/// Cluster bookkeeping plus exact expectations on the (symmetrized) rho.
struct ExactCtx {
    const QuantumOracle& o;
    Mat rho;
    std::vector<std::vector<int>> members;  // oracle spin indices per cluster
    std::vector<int> cluster_of;            // per oracle spin
    EomParams pp;

    int rep(int k) const { return members[k][0]; }
    bool pair_ok(int k, int j) const { return k != j || members[k].size() >= 2; }
    // representative distinct spins for cluster pair (k, j)
    std::pair<int, int> pair(int k, int j) const {
        if (k != j) return {members[k][0], members[j][0]};
        return {members[k][0], members[k][1]};
    }

    cplx m(const Mat& r, std::vector<std::string> spec) const {
        return o.expectation(r, spec);
    }
    cplx m(std::vector<std::string> spec) const { return o.expectation(rho, spec); }
};

ExactCtx make_context(const QuantumOracle& oracle, const Mat& rho,
                      const std::vector<int>& cluster_sizes) {
    ExactCtx ctx{oracle, rho, {}, {}, {}};
    const auto& spins = oracle.config().spins;
    int next = 0;
    for (std::size_t k = 0; k < cluster_sizes.size(); ++k) {
        const int mk = cluster_sizes[k];
        if (mk < 1 || mk > 2)
            throw invalid_parameter("verify_eom: cluster sizes of 1 or 2 supported");
        std::vector<int> mem;
        for (int i = 0; i < mk; ++i) {
            if (next >= static_cast<int>(spins.size()))
                throw invalid_parameter("verify_eom: cluster sizes exceed spin count");
            if (i > 0 && (spins[next].delta != spins[mem[0]].delta ||
                          spins[next].g != spins[mem[0]].g))
                throw invalid_parameter("verify_eom: cluster members must share (delta, g)");
            ctx.cluster_of.push_back(static_cast<int>(k));
            mem.push_back(next++);
        }
        ctx.members.push_back(std::move(mem));
        ctx.pp.g.push_back(spins[ctx.members.back()[0]].g);
        ctx.pp.delta.push_back(spins[ctx.members.back()[0]].delta);
        ctx.pp.M.push_back(static_cast<double>(mk));
    }
    if (next != static_cast<int>(spins.size()))
        throw invalid_parameter("verify_eom: cluster sizes must cover all spins");
    const auto& p = oracle.config().params;
    ctx.pp.kappa = p.kappa;
    ctx.pp.delta_c = p.delta_c;
    ctx.pp.eta = p.eta;
    ctx.pp.gamma_h = p.gamma_h;
    ctx.pp.gamma_p = p.gamma_p;
    ctx.pp.L = static_cast<int>(ctx.members.size());

    // enforce exchange symmetry inside each two-spin cluster
    for (const auto& mem : ctx.members)
        if (mem.size() == 2) {
            Mat s = oracle.swap_operator(mem[0], mem[1]);
            ctx.rho = 0.5 * (ctx.rho + s * ctx.rho * s);
        }
    return ctx;
}

/// Exact moments of rho written into a CE3-layout state vector. Intra-cluster
/// pair slots without two member spins stay zero; their multiplicity weight in
/// every cluster sum is zero, so the value never enters another equation.
Vec exact_state(const ExactCtx& c, const StateLayout& lo) {
    Vec x = Vec::Zero(lo.total_real_count);
    MutableStateView w(lo, x);
    const int L = lo.L;

    w.set_a(c.m({"a"}));
    w.set_adad(c.m({"ad", "ad"}));
    w.set_ada(c.m({"ad", "a"}).real());
    w.set_adaa(c.m({"ad", "a", "a"}));
    w.set_aaa(c.m({"a", "a", "a"}));

    for (int k = 0; k < L; ++k) {
        const int p = c.rep(k);
        w.set_sm(k, c.m({tk("sm", p)}));
        w.set_sz(k, c.m({tk("sz", p)}).real());
        w.set_sza(k, c.m({tk("sz", p), "a"}));
        w.set_smad(k, c.m({tk("sm", p), "ad"}));
        w.set_sma(k, c.m({tk("sm", p), "a"}));
        w.set_szada(k, c.m({tk("sz", p), "ad", "a"}).real());
        w.set_smada(k, c.m({tk("sm", p), "ad", "a"}));
        w.set_smadad(k, c.m({tk("sm", p), "ad", "ad"}));
        w.set_szaa(k, c.m({tk("sz", p), "a", "a"}));
        w.set_smaa(k, c.m({tk("sm", p), "a", "a"}));
    }
    for (int k = 0; k < L; ++k) {
        for (int j = 0; j < L; ++j) {
            if (!c.pair_ok(k, j)) continue;
            auto [p, q] = c.pair(k, j);
            w.set_zsm(k, j, c.m({tk("sz", p), tk("sm", q)}));
            w.set_spsma(k, j, c.m({tk("sp", p), tk("sm", q), "a"}));
            w.set_zsmad(k, j, c.m({tk("sz", p), tk("sm", q), "ad"}));
            w.set_zsma(k, j, c.m({tk("sz", p), tk("sm", q), "a"}));
        }
        for (int j = k; j < L; ++j) {
            if (!c.pair_ok(k, j)) continue;
            auto [p, q] = c.pair(k, j);
            w.set_spsm(k, j, c.m({tk("sp", p), tk("sm", q)}));
            w.set_zz(k, j, c.m({tk("sz", p), tk("sz", q)}).real());
            w.set_smsm(k, j, c.m({tk("sm", p), tk("sm", q)}));
            w.set_zza(k, j, c.m({tk("sz", p), tk("sz", q), "a"}));
            w.set_smsmad(k, j, c.m({tk("sm", p), tk("sm", q), "ad"}));
            w.set_smsma(k, j, c.m({tk("sm", p), tk("sm", q), "a"}));
        }
    }
    return x;
}

/// Fourth-order moments read exactly from rho (FourthSource policy).
struct OracleFourth {
    const ExactCtx& c;

    cplx one(int k, const char* s, std::vector<std::string> cav) const {
        std::vector<std::string> spec{tk(s, c.rep(k))};
        spec.insert(spec.end(), cav.begin(), cav.end());
        return c.m(spec);
    }
    cplx two(int k, int j, const char* s1, const char* s2,
             std::vector<std::string> cav) const {
        if (!c.pair_ok(k, j)) return {};
        auto [p, q] = c.pair(k, j);
        std::vector<std::string> spec{tk(s1, p), tk(s2, q)};
        spec.insert(spec.end(), cav.begin(), cav.end());
        return c.m(spec);
    }

    cplx sm_adada(int k) const { return one(k, "sm", {"ad", "ad", "a"}); }
    cplx sz_adaa(int k) const { return one(k, "sz", {"ad", "a", "a"}); }
    cplx sz_adada(int k) const { return one(k, "sz", {"ad", "ad", "a"}); }
    cplx sm_adaa(int k) const { return one(k, "sm", {"ad", "a", "a"}); }
    cplx sp_aaa(int k) const { return one(k, "sp", {"a", "a", "a"}); }
    cplx sz_aaa(int k) const { return one(k, "sz", {"a", "a", "a"}); }
    cplx zsm_ada(int k, int j) const { return two(k, j, "sz", "sm", {"ad", "a"}); }
    cplx zsm_adad(int k, int j) const { return two(k, j, "sz", "sm", {"ad", "ad"}); }
    cplx zsm_aa(int k, int j) const { return two(k, j, "sz", "sm", {"a", "a"}); }
    cplx zz_ada(int k, int j) const { return two(k, j, "sz", "sz", {"ad", "a"}); }
    cplx zz_aa(int k, int j) const { return two(k, j, "sz", "sz", {"a", "a"}); }
    cplx smsm_ada(int k, int j) const { return two(k, j, "sm", "sm", {"ad", "a"}); }
    cplx smsm_adad(int k, int j) const { return two(k, j, "sm", "sm", {"ad", "ad"}); }
    cplx spsm_ada(int k, int j) const { return two(k, j, "sp", "sm", {"ad", "a"}); }
    cplx spsm_aa(int k, int j) const { return two(k, j, "sp", "sm", {"a", "a"}); }
};

/// True three-spin sums over the physical spins outside the pair
/// (TripleSpinSource policy).
struct OracleTriple {
    const ExactCtx& c;

    cplx sum(int k, int j, const char* s1, const char* s2, const char* s3,
             bool third_first) const {
        if (!c.pair_ok(k, j)) return {};
        auto [p, q] = c.pair(k, j);
        cplx acc{};
        for (int s = 0; s < static_cast<int>(c.cluster_of.size()); ++s) {
            if (s == p || s == q) continue;
            const double gs = c.pp.g[c.cluster_of[s]];
            std::vector<std::string> spec;
            if (third_first) spec = {tk(s3, s), tk(s1, p), tk(s2, q)};
            else spec = {tk(s1, p), tk(s2, q), tk(s3, s)};
            acc += gs * c.m(spec);
        }
        return acc;
    }

    cplx zz_m(int k, int j) const { return sum(k, j, "sz", "sz", "sm", false); }
    cplx p_mm(int k, int j) const { return sum(k, j, "sm", "sm", "sp", true); }
    cplx pm_m(int k, int j) const { return sum(k, j, "sp", "sm", "sm", false); }
    cplx p_zm(int k, int j) const { return sum(k, j, "sz", "sm", "sp", true); }
    cplx zm_m(int k, int j) const { return sum(k, j, "sz", "sm", "sm", false); }
    cplx mm_m(int k, int j) const { return sum(k, j, "sm", "sm", "sm", false); }
};

// Exact d<O>/dt = Tr(O L(rho)) for one tracked variable.
cplx exact_derivative(const ExactCtx& c, const Mat& lrho, const VariableRecord& r) {
    auto one = [&](const char* s, std::vector<std::string> cav) {
        std::vector<std::string> spec{tk(s, c.rep(r.mu))};
        spec.insert(spec.end(), cav.begin(), cav.end());
        return c.m(lrho, spec);
    };
    auto two = [&](const char* s1, const char* s2, std::vector<std::string> cav) {
        auto [p, q] = c.pair(r.mu, r.nu);
        std::vector<std::string> spec{tk(s1, p), tk(s2, q)};
        spec.insert(spec.end(), cav.begin(), cav.end());
        return c.m(lrho, spec);
    };
    switch (r.family) {
        case Family::A: return c.m(lrho, {"a"});
        case Family::Sm: return one("sm", {});
        case Family::Sz: return one("sz", {});
        case Family::SzA: return one("sz", {"a"});
        case Family::SzSm: return two("sz", "sm", {});
        case Family::SmAd: return one("sm", {"ad"});
        case Family::SpSm: return two("sp", "sm", {});
        case Family::SmA: return one("sm", {"a"});
        case Family::AdAd: return c.m(lrho, {"ad", "ad"});
        case Family::AdA: return c.m(lrho, {"ad", "a"});
        case Family::SzSz: return two("sz", "sz", {});
        case Family::SmSm: return two("sm", "sm", {});
        case Family::SzAdA: return one("sz", {"ad", "a"});
        case Family::SmAdA: return one("sm", {"ad", "a"});
        case Family::SmAdAd: return one("sm", {"ad", "ad"});
        case Family::SzAA: return one("sz", {"a", "a"});
        case Family::SmAA: return one("sm", {"a", "a"});
        case Family::AdAA: return c.m(lrho, {"ad", "a", "a"});
        case Family::AAA: return c.m(lrho, {"a", "a", "a"});
        case Family::SzSzA: return two("sz", "sz", {"a"});
        case Family::SmSmAd: return two("sm", "sm", {"ad"});
        case Family::SpSmA: return two("sp", "sm", {"a"});
        case Family::SzSmAd: return two("sz", "sm", {"ad"});
        case Family::SzSmA: return two("sz", "sm", {"a"});
        case Family::SmSmA: return two("sm", "sm", {"a"});
    }
    return {};
}

}  // namespace

VerifyReport verify_eom(const QuantumOracle& oracle, const Mat& rho, CumulantOrder order,
                        const std::vector<int>& cluster_sizes) {
    ExactCtx ctx = make_context(oracle, rho, cluster_sizes);
    StateLayout lo = build_layout(CumulantOrder::CE3, ctx.pp.L);
    Vec x = exact_state(ctx, lo);
    Mat lrho = oracle.liouvillian_apply(ctx.rho);

    // production equation code with every closure replaced by exact moments
    Vec dx = Vec::Zero(lo.total_real_count);
    StateView sv(lo, x);
    MutableStateView out(lo, dx);
    CollectiveSums cs;
    cs.resize(lo.L, CumulantOrder::CE3);
    compute_collective_sums(ctx.pp, sv, CumulantOrder::CE3, cs);
    TrackedThird th{sv};
    eval_low_orders(ctx.pp, sv, th, cs, out);
    OracleFourth f4{ctx};
    OracleTriple t3{ctx};
    eval_third_order(ctx.pp, sv, f4, t3, cs, out);

    const int max_order = static_cast<int>(order);
    VerifyReport report;
    for (const auto& rec : lo.describe()) {
        if (family_order(rec.family) > max_order) continue;
        if (rec.nu >= 0 && !ctx.pair_ok(rec.mu, rec.nu)) {
            report.skipped.push_back(std::string(family_name(rec.family)) + "(" +
                                     std::to_string(rec.mu) + "," +
                                     std::to_string(rec.nu) + ")");
            continue;
        }
        const cplx exact = exact_derivative(ctx, lrho, rec);
        const cplx prod = rec.real ? cplx(dx[rec.offset], 0.0)
                                   : cplx(dx[rec.offset], dx[rec.offset + 1]);
        const double resid = std::abs(prod - exact) / std::max(1.0, std::abs(exact));
        report.residuals.push_back({rec.family, rec.mu, rec.nu, resid});
    }
    return report;
}

}  // namespace cqed
