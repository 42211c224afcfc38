#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cqed/analysis.hpp"
#include "cqed/io.hpp"
#include "cqed/oracle.hpp"
#include "cqed/semiclassical.hpp"

using json = nlohmann::json;
using namespace cqed;

namespace {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw config_error(ctx + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) { ok = true; break; }
        if (!ok) throw config_error(ctx + ": unknown key '" + it.key() + "'");
    }
}

double get_num(const json& j, const std::string& ctx, const char* key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) throw config_error(ctx + "." + key + ": expected a number");
    return j[key].get<double>();
}

double require_num(const json& j, const std::string& ctx, const char* key) {
    if (!j.contains(key)) throw config_error(ctx + "." + key + ": required");
    if (!j[key].is_number()) throw config_error(ctx + "." + key + ": expected a number");
    return j[key].get<double>();
}

std::vector<double> require_num_list(const json& j, const std::string& ctx,
                                     const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].empty())
        throw config_error(ctx + "." + key + ": required non-empty array");
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number()) throw config_error(ctx + "." + key + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

CumulantOrder parse_order(const std::string& s) {
    if (s == "ce1") return CumulantOrder::CE1;
    if (s == "ce2") return CumulantOrder::CE2;
    if (s == "ce3") return CumulantOrder::CE3;
    throw config_error("order: expected ce1|ce2|ce3, got '" + s + "'");
}

struct EnsembleSpec {
    std::string kind;  // homogeneous | gaussian
    double n = 0.0;
    double g = 0.0;           // rad/us, resolved
    double gamma_fwhm = 0.0;  // rad/us, gaussian only
    int l = 51;
    double span = 2.0;

    ClusterEnsemble build() const {
        if (kind == "homogeneous") return ClusterEnsemble::homogeneous(n, g);
        return gaussian_ensemble(n, gamma_fwhm, g, l, span);
    }
    ClusterEnsemble build_with_gamma(double gamma) const {
        return gaussian_ensemble(n, gamma, g, l, span);
    }
};

struct RunConfig {
    PhysicalParams params{};
    EnsembleSpec ensemble;
    CumulantOrder order = CumulantOrder::CE3;
    IntegratorConfig integrator;
    std::string out_dir = ".";
    int workers = 1;
    bool svg = false;
    json raw;       // full document
    json resolved;  // with defaults applied
};

RunConfig parse_config(const std::string& path, const std::string& subcommand) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    check_keys(j, "config",
               {"params", "ensemble", "order", "integrator", "output_dir", "workers",
                "svg", "steady", "evolve", "scan", "normalized", "boundary"});

    RunConfig rc;
    rc.raw = j;

    json jp = j.value("params", json::object());
    check_keys(jp, "params", {"kappa_mhz", "gamma_h_mhz", "gamma_p_mhz", "delta_c_mhz",
                              "eta_mhz"});
    PhysicalParams ref = PhysicalParams::reference();
    rc.params.kappa = mhz_to_rad(get_num(jp, "params", "kappa_mhz", rad_to_mhz(ref.kappa)));
    rc.params.gamma_h =
        mhz_to_rad(get_num(jp, "params", "gamma_h_mhz", rad_to_mhz(ref.gamma_h)));
    rc.params.gamma_p = mhz_to_rad(get_num(jp, "params", "gamma_p_mhz", 0.0));
    rc.params.delta_c = mhz_to_rad(get_num(jp, "params", "delta_c_mhz", 0.0));
    rc.params.eta = mhz_to_rad(get_num(jp, "params", "eta_mhz", 0.0));
    rc.params.validate();

    if (!j.contains("ensemble")) throw config_error("config.ensemble: required");
    json je = j["ensemble"];
    check_keys(je, "ensemble", {"kind", "n", "g_mhz", "cooperativity", "gamma_fwhm_mhz",
                                "l", "span"});
    rc.ensemble.kind = je.value("kind", std::string("homogeneous"));
    if (rc.ensemble.kind != "homogeneous" && rc.ensemble.kind != "gaussian")
        throw config_error("ensemble.kind: expected homogeneous|gaussian");
    rc.ensemble.n = require_num(je, "ensemble", "n");
    if (je.contains("g_mhz") == je.contains("cooperativity"))
        throw config_error("ensemble: give exactly one of g_mhz or cooperativity");
    if (je.contains("g_mhz")) {
        rc.ensemble.g = mhz_to_rad(require_num(je, "ensemble", "g_mhz"));
    } else {
        // cooperativity of the unbroadened (resonant) ensemble fixes g
        const double c = require_num(je, "ensemble", "cooperativity");
        if (!(c > 0.0)) throw config_error("ensemble.cooperativity: must be > 0");
        rc.ensemble.g = std::sqrt(c * rc.params.kappa * rc.params.gamma_h / rc.ensemble.n);
    }
    if (rc.ensemble.kind == "gaussian") {
        rc.ensemble.gamma_fwhm = mhz_to_rad(require_num(je, "ensemble", "gamma_fwhm_mhz"));
        rc.ensemble.l = static_cast<int>(get_num(je, "ensemble", "l", 51));
        rc.ensemble.span = get_num(je, "ensemble", "span", 2.0);
    } else if (je.contains("gamma_fwhm_mhz") || je.contains("l") || je.contains("span")) {
        throw config_error("ensemble: gaussian-only keys on a homogeneous ensemble");
    }
    rc.ensemble.build().validate();

    rc.order = parse_order(j.value("order", std::string("ce3")));

    json ji = j.value("integrator", json::object());
    check_keys(ji, "integrator",
               {"rtol", "atol", "max_time_us", "ss_rel_tol", "window_us"});
    rc.integrator.rtol = get_num(ji, "integrator", "rtol", rc.integrator.rtol);
    rc.integrator.atol = get_num(ji, "integrator", "atol", rc.integrator.atol);
    // 0 selects the adaptive horizon derived from the distance to critical
    rc.integrator.max_time = get_num(ji, "integrator", "max_time_us", 0.0);
    rc.integrator.ss_rel_tol = get_num(ji, "integrator", "ss_rel_tol", rc.integrator.ss_rel_tol);
    rc.integrator.window = get_num(ji, "integrator", "window_us", rc.integrator.window);

    rc.out_dir = j.value("output_dir", std::string("."));
    rc.workers = static_cast<int>(get_num(j, "config", "workers", 1));
    if (rc.workers < 1) throw config_error("workers: must be >= 1");
    if (j.contains("svg")) {
        if (!j["svg"].is_boolean()) throw config_error("svg: expected a boolean");
        rc.svg = j["svg"].get<bool>();
    }

    rc.resolved = json{
        {"params",
         {{"kappa_mhz", rad_to_mhz(rc.params.kappa)},
          {"gamma_h_mhz", rad_to_mhz(rc.params.gamma_h)},
          {"gamma_p_mhz", rad_to_mhz(rc.params.gamma_p)},
          {"delta_c_mhz", rad_to_mhz(rc.params.delta_c)},
          {"eta_mhz", rad_to_mhz(rc.params.eta)}}},
        {"ensemble",
         {{"kind", rc.ensemble.kind},
          {"n", rc.ensemble.n},
          {"g_mhz", rad_to_mhz(rc.ensemble.g)}}},
        {"order", to_string(rc.order)},
        {"integrator",
         {{"rtol", rc.integrator.rtol},
          {"atol", rc.integrator.atol},
          {"max_time_us", rc.integrator.max_time},
          {"ss_rel_tol", rc.integrator.ss_rel_tol},
          {"window_us", rc.integrator.window}}},
        {"output_dir", rc.out_dir},
        {"workers", rc.workers},
        {"svg", rc.svg}};
    if (rc.ensemble.kind == "gaussian") {
        rc.resolved["ensemble"]["gamma_fwhm_mhz"] = rad_to_mhz(rc.ensemble.gamma_fwhm);
        rc.resolved["ensemble"]["l"] = rc.ensemble.l;
        rc.resolved["ensemble"]["span"] = rc.ensemble.span;
    }
    if (j.contains(subcommand)) rc.resolved[subcommand] = j[subcommand];
    return rc;
}

std::string sanitize_status(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

// Exit-code classification per the outcome of a failed required point.
int exit_for_attempts(const std::vector<BasinAttempt>& attempts) {
    bool unphysical = false;
    for (const auto& a : attempts) {
        if (a.outcome.kind == OutcomeKind::Timeout ||
            a.outcome.kind == OutcomeKind::LimitCycle)
            return 3;
        if (a.outcome.kind == OutcomeKind::Unphysical) unphysical = true;
    }
    return unphysical ? 4 : 3;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

std::string out_path(const RunConfig& rc, const std::string& name) {
    std::filesystem::create_directories(rc.out_dir);
    return (std::filesystem::path(rc.out_dir) / name).string();
}

void parallel_for(int workers, std::size_t count, const std::function<void(std::size_t)>& fn) {
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    const int nw = std::max(1, workers);
    std::vector<std::thread> pool;
    for (int i = 1; i < nw; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
}

// Critical analysis of the configured ensemble rescaled to n spins.
CriticalAnalysis critical_for(const RunConfig& rc, const ClusterEnsemble& ens) {
    return ensemble_critical_drives(ens, rc.params);
}

// ---------------------------------------------------------------------------

int run_steady(const RunConfig& rc) {
    json js = rc.raw.value("steady", json::object());
    check_keys(js, "steady", {"c_values", "eta_ratio_max", "eta_points", "use_ensemble"});
    const double ratio_max = get_num(js, "steady", "eta_ratio_max", 1.5);
    const int points = static_cast<int>(get_num(js, "steady", "eta_points", 301));
    if (points < 2) throw config_error("steady.eta_points: must be >= 2");
    bool use_ensemble = js.value("use_ensemble", false);
    if (!use_ensemble && !js.contains("c_values"))
        throw config_error("steady: give c_values or use_ensemble=true");

    Timer timer;
    CsvTable t;
    t.header = {"label", "eta_mhz", "eta_over_etacrit", "x", "x_over_n", "branch",
                "stable", "tangency"};
    std::vector<SvgSeries> chart;

    auto emit = [&](const std::string& label, double eta_ref, double n,
                    const std::vector<BranchPoint>& pts) {
        SvgSeries s{label, {}, {}};
        for (const auto& bp : pts) {
            t.rows.push_back({label, format_double(rad_to_mhz(bp.eta)),
                              format_double(bp.eta / eta_ref), format_double(bp.x),
                              format_double(bp.x / n), to_string(bp.branch),
                              bp.stable ? "1" : "0", bp.tangency ? "1" : "0"});
            s.x.push_back(rad_to_mhz(bp.eta));
            s.y.push_back(bp.x / n);
        }
        chart.push_back(std::move(s));
    };

    if (use_ensemble) {
        auto ens = rc.ensemble.build();
        auto crit = critical_for(rc, ens);
        std::vector<double> grid;
        for (int i = 1; i <= points; ++i)
            grid.push_back(ratio_max * crit.eta_ref() * i / points);
        auto pts = semiclassical_curve(ens, rc.params, grid);
        char label[32];
        std::snprintf(label, sizeof(label), "C_eff=%.4g", cooperativity(ens, rc.params));
        emit(label, crit.eta_ref(), ens.total_spins, pts);
    } else {
        for (double c : require_num_list(js, "steady", "c_values")) {
            const double n = rc.ensemble.n;
            const double g = std::sqrt(c * rc.params.kappa * rc.params.gamma_h / n);
            const double n0 = saturation_photon_number(g, rc.params.gamma_h);
            auto crit = critical_drives(c, n0, rc.params.kappa);
            std::vector<BranchPoint> pts;
            for (int i = 1; i <= points; ++i) {
                const double eta = ratio_max * crit.eta_ref() * i / points;
                auto roots = homogeneous_steady_states(c, n0, eta, rc.params.kappa);
                pts.insert(pts.end(), roots.begin(), roots.end());
            }
            char label[32];
            std::snprintf(label, sizeof(label), "C=%.4g", c);
            emit(label, crit.eta_ref(), n, pts);
        }
    }

    const std::string csv = out_path(rc, "steady.csv");
    write_csv(csv, t);
    write_metadata(csv, "steady", rc.resolved.dump(), timer.seconds());
    if (rc.svg)
        write_svg_chart(out_path(rc, "steady.svg"), "stationary photon number",
                        "eta (MHz)", "|<a>|^2 / N", chart);
    return 0;
}

int run_evolve(const RunConfig& rc) {
    json je = rc.raw.value("evolve", json::object());
    check_keys(je, "evolve", {"n_values", "eta_ratio", "t_max_us", "samples", "sz0"});
    auto n_values = require_num_list(je, "evolve", "n_values");
    const double ratio = get_num(je, "evolve", "eta_ratio", 1.05);
    const double t_max = get_num(je, "evolve", "t_max_us", 50.0);
    const int samples = static_cast<int>(get_num(je, "evolve", "samples", 400));
    const double sz0 = get_num(je, "evolve", "sz0", -1.0);
    if (!(t_max > 0.0) || samples < 2)
        throw config_error("evolve: t_max_us must be > 0 and samples >= 2");

    Timer timer;
    auto base = rc.ensemble.build();
    std::vector<double> ts;
    for (int i = 0; i <= samples; ++i) ts.push_back(t_max * i / samples);

    struct Row { double n, t, x, sz; };
    std::vector<std::vector<Row>> per_n(n_values.size());
    std::atomic<int> exit_code{0};
    parallel_for(rc.workers, n_values.size(), [&](std::size_t i) {
        const double n = n_values[i];
        auto [ens, p] = scale_ensemble(base, rc.params, n);
        auto crit = critical_for(rc, ens);
        p.eta = ratio * crit.eta_ref();
        CumulantEom eom(rc.order, ens, p);
        Vec x0 = initial_state(eom.layout(), sz0);
        IntegratorConfig cfg = rc.integrator;
        if (cfg.max_time <= 0.0) cfg.max_time = t_max;
        auto rhs = [&](const Vec& x, Vec& dx) { eom.rhs(x, dx); };
        try {
            auto traj = evolve(rhs, x0, cfg, ts);
            for (const auto& pt : traj) {
                StateView s(eom.layout(), pt.state);
                double sz = 0.0;
                for (int k = 0; k < eom.layout().L; ++k)
                    sz += ens.clusters[k].weight * s.sz(k);
                sz /= ens.total_spins;
                per_n[i].push_back({n, pt.t, std::norm(s.a()), sz});
            }
        } catch (const stiffness_error&) {
            exit_code.store(4);
        }
    });

    CsvTable t;
    t.header = {"n", "t_us", "x", "x_over_n", "sz"};
    std::vector<SvgSeries> chart;
    for (std::size_t i = 0; i < per_n.size(); ++i) {
        SvgSeries s{"N=" + format_double(n_values[i]), {}, {}};
        for (const auto& r : per_n[i]) {
            t.rows.push_back({format_double(r.n), format_double(r.t), format_double(r.x),
                              format_double(r.x / r.n), format_double(r.sz)});
            s.x.push_back(r.t);
            s.y.push_back(r.x / r.n);
        }
        chart.push_back(std::move(s));
    }
    const std::string csv = out_path(rc, "evolve.csv");
    write_csv(csv, t);
    write_metadata(csv, "evolve", rc.resolved.dump(), timer.seconds());
    if (rc.svg)
        write_svg_chart(out_path(rc, "evolve.svg"), "cavity population", "t (us)",
                        "|<a>|^2 / N", chart);
    return exit_code.load();
}

std::vector<CumulantOrder> parse_orders(const json& block, const std::string& ctx,
                                        std::vector<std::string> dflt) {
    std::vector<std::string> names = dflt;
    if (block.contains("orders")) {
        names.clear();
        for (const auto& v : block["orders"]) names.push_back(v.get<std::string>());
    }
    std::vector<CumulantOrder> out;
    for (const auto& s : names) out.push_back(parse_order(s));
    if (out.empty()) throw config_error(ctx + ".orders: empty");
    return out;
}

int run_scan(const RunConfig& rc) {
    json js = rc.raw.value("scan", json::object());
    check_keys(js, "scan",
               {"n_values", "eta_ratio_min", "eta_ratio_max", "eta_points", "orders"});
    auto n_values = require_num_list(js, "scan", "n_values");
    const double rmin = get_num(js, "scan", "eta_ratio_min", 0.85);
    const double rmax = get_num(js, "scan", "eta_ratio_max", 1.25);
    const int points = static_cast<int>(get_num(js, "scan", "eta_points", 21));
    if (!(rmin > 0.0) || !(rmax > rmin) || points < 2)
        throw config_error("scan: need 0 < eta_ratio_min < eta_ratio_max, eta_points >= 2");
    auto orders = parse_orders(js, "scan", {to_string(rc.order)});

    Timer timer;
    auto base = rc.ensemble.build();
    struct Item { CumulantOrder order; double n, ratio; };
    std::vector<Item> items;
    for (auto o : orders)
        for (double n : n_values)
            for (int i = 0; i < points; ++i)
                items.push_back({o, n, rmin + (rmax - rmin) * i / (points - 1)});

    struct Res { double x = 0.0; double eta = 0.0; std::string status = "ok"; };
    std::vector<Res> res(items.size());
    std::atomic<int> exit_code{0};
    parallel_for(rc.workers, items.size(), [&](std::size_t i) {
        const auto& it = items[i];
        auto [ens, p] = scale_ensemble(base, rc.params, it.n);
        auto crit = critical_for(rc, ens);
        p.eta = it.ratio * crit.eta_ref();
        res[i].eta = p.eta;
        SolverSettings st;
        st.integrator = rc.integrator;
        st.eta_plus = crit.eta_ref();
        try {
            res[i].x = stationary_photon(it.order, ens, p, st);
        } catch (const basin_exhausted& e) {
            res[i].status = sanitize_status(e.what());
            int code = exit_for_attempts(e.attempts);
            int cur = exit_code.load();
            while (code > cur && !exit_code.compare_exchange_weak(cur, code)) {}
        }
    });

    CsvTable t;
    t.header = {"order", "n", "eta_over_etacrit", "eta_mhz", "x", "x_over_n", "status"};
    std::map<std::string, SvgSeries> chart;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        t.rows.push_back({to_string(it.order), format_double(it.n),
                          format_double(it.ratio), format_double(rad_to_mhz(res[i].eta)),
                          format_double(res[i].x), format_double(res[i].x / it.n),
                          res[i].status});
        if (res[i].status == "ok") {
            std::string key = std::string(to_string(it.order)) + " N=" + format_double(it.n);
            auto& s = chart[key];
            s.label = key;
            s.x.push_back(it.ratio);
            s.y.push_back(res[i].x / it.n);
        }
    }
    const std::string csv = out_path(rc, "scan.csv");
    write_csv(csv, t);
    write_metadata(csv, "scan", rc.resolved.dump(), timer.seconds());
    if (rc.svg) {
        std::vector<SvgSeries> series;
        for (auto& [k, s] : chart) series.push_back(s);
        write_svg_chart(out_path(rc, "scan.svg"), "stationary photon number",
                        "eta / eta_crit", "|<a>|^2 / N", series);
    }
    return exit_code.load();
}

int run_normalized(const RunConfig& rc) {
    json jn = rc.raw.value("normalized", json::object());
    check_keys(jn, "normalized",
               {"eta_ratio", "n_min", "n_max", "points_per_decade", "orders"});
    const double ratio = get_num(jn, "normalized", "eta_ratio", 1.05);
    const double n_min = get_num(jn, "normalized", "n_min", 5.0);
    const double n_max = get_num(jn, "normalized", "n_max", 300.0);
    const int ppd = static_cast<int>(get_num(jn, "normalized", "points_per_decade", 24));
    if (!(n_min > 0.0) || !(n_max > n_min) || ppd < 2)
        throw config_error("normalized: need 0 < n_min < n_max, points_per_decade >= 2");
    auto orders = parse_orders(jn, "normalized", {"ce2", "ce3"});

    Timer timer;
    auto base = rc.ensemble.build();
    std::vector<double> ns;
    const double step = std::pow(10.0, 1.0 / ppd);
    for (double n = n_min; n <= n_max * (1.0 + 1e-12); n *= step) ns.push_back(n);

    struct Item { CumulantOrder order; double n; };
    std::vector<Item> items;
    for (auto o : orders)
        for (double n : ns) items.push_back({o, n});

    struct Res { double x = 0.0, x_sc = 0.0; std::string status = "ok"; };
    std::vector<Res> res(items.size());
    std::atomic<int> exit_code{0};
    parallel_for(rc.workers, items.size(), [&](std::size_t i) {
        const auto& it = items[i];
        auto [ens, p] = scale_ensemble(base, rc.params, it.n);
        auto crit = critical_for(rc, ens);
        p.eta = ratio * crit.eta_ref();
        SolverSettings st;
        st.integrator = rc.integrator;
        st.eta_plus = crit.eta_ref();
        try {
            res[i].x_sc = stationary_photon(CumulantOrder::CE1, ens, p, st);
            res[i].x = stationary_photon(it.order, ens, p, st);
        } catch (const basin_exhausted& e) {
            res[i].status = sanitize_status(e.what());
            int code = exit_for_attempts(e.attempts);
            int cur = exit_code.load();
            while (code > cur && !exit_code.compare_exchange_weak(cur, code)) {}
        }
    });

    CsvTable t;
    t.header = {"order", "n", "x", "x_ce1", "normalized", "status"};
    std::map<std::string, SvgSeries> chart;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        const double norm =
            res[i].status == "ok" ? normalized_amplitude(res[i].x, res[i].x_sc) : 0.0;
        t.rows.push_back({to_string(it.order), format_double(it.n),
                          format_double(res[i].x), format_double(res[i].x_sc),
                          format_double(norm), res[i].status});
        if (res[i].status == "ok") {
            auto& s = chart[to_string(it.order)];
            s.label = to_string(it.order);
            s.x.push_back(it.n);
            s.y.push_back(norm);
        }
    }
    const std::string csv = out_path(rc, "normalized.csv");
    write_csv(csv, t);
    write_metadata(csv, "normalized", rc.resolved.dump(), timer.seconds());
    if (rc.svg) {
        std::vector<SvgSeries> series;
        for (auto& [k, s] : chart) series.push_back(s);
        write_svg_chart(out_path(rc, "normalized.svg"), "normalized stationary amplitude",
                        "N", "|a~|^2", series, true, false);
    }
    return exit_code.load();
}

int run_boundary(const RunConfig& rc) {
    json jb = rc.raw.value("boundary", json::object());
    check_keys(jb, "boundary",
               {"c_values", "gamma_values_mhz", "eta_ratios", "delta_eps", "n_min",
                "n_max", "confirm_points", "points_per_decade"});
    auto ratios = require_num_list(jb, "boundary", "eta_ratios");
    for (double r : ratios)
        if (r == 1.0)
            throw config_error("boundary.eta_ratios: ratio 1.0 sits on the critical "
                               "point and is excluded");
    const double delta_eps = get_num(jb, "boundary", "delta_eps", 1e-2);
    const double n_min = get_num(jb, "boundary", "n_min", 2.0);
    const double n_max = get_num(jb, "boundary", "n_max", 1e5);
    const int confirm = static_cast<int>(get_num(jb, "boundary", "confirm_points", 3));
    const int ppd = static_cast<int>(get_num(jb, "boundary", "points_per_decade", 12));
    const bool gamma_mode = jb.contains("gamma_values_mhz");
    if (gamma_mode == jb.contains("c_values"))
        throw config_error("boundary: give exactly one of c_values or gamma_values_mhz");
    if (gamma_mode && rc.ensemble.kind != "gaussian")
        throw config_error("boundary.gamma_values_mhz: requires a gaussian ensemble");

    Timer timer;
    std::vector<BoundaryTask> tasks;
    if (gamma_mode) {
        for (double gm : require_num_list(jb, "boundary", "gamma_values_mhz")) {
            auto base = rc.ensemble.build_with_gamma(mhz_to_rad(gm));
            auto crit = ensemble_critical_drives(base, rc.params);
            for (double r : ratios) {
                PhysicalParams p = rc.params;
                p.eta = r * crit.eta_ref();
                tasks.push_back({"gamma", gm, base, p, r, crit.eta_ref()});
            }
        }
    } else {
        for (double c : require_num_list(jb, "boundary", "c_values")) {
            const double n_ref = rc.ensemble.n;
            const double g = std::sqrt(c * rc.params.kappa * rc.params.gamma_h / n_ref);
            auto base = ClusterEnsemble::homogeneous(n_ref, g);
            auto crit = critical_drives(c, saturation_photon_number(g, rc.params.gamma_h),
                                        rc.params.kappa);
            for (double r : ratios) {
                PhysicalParams p = rc.params;
                p.eta = r * crit.eta_ref();
                tasks.push_back({"c", c, base, p, r, crit.eta_ref()});
            }
        }
    }

    SolverSettings st;
    st.integrator = rc.integrator;
    auto points =
        boundary_sweep(tasks, delta_eps, n_min, n_max, confirm, st, rc.workers, ppd);

    CsvTable t;
    t.header = {gamma_mode ? "gamma_mhz" : "c", "eta_over_etacrit", "n_sc", "d12", "d23",
                "d13", "status"};
    std::map<std::string, SvgSeries> chart;
    int exit_code = 0;
    for (const auto& p : points) {
        std::string status = p.status;
        if (status.rfind("nsc_search: criterion not met", 0) == 0) status = "not-found";
        else if (status != "ok") exit_code = std::max(exit_code, 3);
        t.rows.push_back({format_double(p.c_or_gamma), format_double(p.eta_ratio),
                          status == "ok" ? format_double(p.n_sc) : "",
                          status == "ok" ? format_double(p.dev.d12) : "",
                          status == "ok" ? format_double(p.dev.d23) : "",
                          status == "ok" ? format_double(p.dev.d13) : "",
                          sanitize_status(status)});
        if (status == "ok") {
            std::string key = (gamma_mode ? "Gamma=" : "C=") + format_double(p.c_or_gamma);
            auto& s = chart[key];
            s.label = key;
            s.x.push_back(p.eta_ratio);
            s.y.push_back(p.n_sc);
        }
    }
    const std::string csv = out_path(rc, "boundary.csv");
    write_csv(csv, t);
    write_metadata(csv, "boundary", rc.resolved.dump(), timer.seconds());
    if (rc.svg) {
        std::vector<SvgSeries> series;
        for (auto& [k, s] : chart) series.push_back(s);
        write_svg_chart(out_path(rc, "boundary.svg"), "semiclassical-to-quantum boundary",
                        "eta / eta_crit", "N_sc", series, false, true);
    }
    return exit_code;
}

int run_oracle_verify(const std::string& out_dir, int spins, int trials,
                      unsigned long long seed, int cutoff, bool have_out) {
    if (spins < 1 || spins > 4)
        throw config_error("oracle-verify: spins must be in [1, 4]");
    if (trials < 1) throw config_error("oracle-verify: trials must be >= 1");

    Timer timer;
    PhysicalParams p = PhysicalParams::reference(0.6 * kTwoPi);
    p.delta_c = 0.25 * kTwoPi;
    p.gamma_p = 0.1 * kTwoPi;

    // spin partitions into clusters; an M=2 cluster exercises the
    // intra-cluster weights
    std::vector<std::vector<int>> partitions{std::vector<int>(spins, 1)};
    if (spins >= 2) {
        std::vector<int> with_pair{2};
        for (int i = 2; i < spins; ++i) with_pair.push_back(1);
        partitions.push_back(with_pair);
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    double max_res = 0.0;
    std::string content = "partition,trial,family,mu,nu,residual\n";
    for (const auto& part : partitions) {
        std::vector<SpinMode> modes;
        std::string pname;
        for (int sz : part) {
            // cluster members share (delta, g); clusters differ
            const double delta = 0.3 * kTwoPi * static_cast<double>(modes.size() % 2 ? -1 : 1) *
                                 (modes.empty() ? 0.0 : 1.0);
            const double g = (0.4 + 0.15 * static_cast<double>(modes.size())) * kTwoPi;
            for (int i = 0; i < sz; ++i) modes.push_back({delta, g});
            if (!pname.empty()) pname += '+';
            pname += format_int(sz);
        }
        HilbertConfig hc{p, modes, cutoff};
        QuantumOracle oracle(hc);
        for (int trial = 0; trial < trials; ++trial) {
            // random full-rank state with the top Fock levels left empty
            const int nc = cutoff + 1, keep = cutoff - 4;
            Mat gmat = Mat::Zero(hc.dim(), hc.dim());
            for (int r = 0; r < hc.dim(); ++r)
                for (int c = 0; c < hc.dim(); ++c)
                    if (r % nc <= keep && c % nc <= keep)
                        gmat(r, c) = cplx(nd(rng), nd(rng));
            Mat rho = gmat * gmat.adjoint();
            rho /= rho.trace().real();
            auto rep = verify_eom(oracle, rho, CumulantOrder::CE3, part);
            for (const auto& r : rep.residuals) {
                max_res = std::max(max_res, r.residual);
                content += pname + ',' + format_int(trial) + ',' +
                           family_name(r.family) + ',' + format_int(r.mu) + ',' +
                           format_int(r.nu) + ',' + format_double(r.residual) + '\n';
            }
        }
    }

    if (have_out) {
        std::filesystem::create_directories(out_dir);
        const std::string csv =
            (std::filesystem::path(out_dir) / "oracle_verify.csv").string();
        write_text(csv, content);
        json cfg{{"spins", spins}, {"trials", trials}, {"seed", seed},
                 {"photon_cutoff", cutoff}};
        write_metadata(csv, "oracle-verify", cfg.dump(), timer.seconds());
    }
    std::printf("max residual over %d trials x %d partitions: %.3e\n", trials,
                static_cast<int>(partitions.size()), max_res);
    return max_res < 1e-8 ? 0 : 3;
}

int run_inventory(const std::string& out_dir, CumulantOrder order, int clusters,
                  bool have_out) {
    if (clusters < 1) throw config_error("inventory: clusters must be >= 1");
    Timer timer;
    StateLayout lo = build_layout(order, clusters);
    std::printf("%d\n", lo.total_real_count);
    if (have_out) {
        std::filesystem::create_directories(out_dir);
        std::map<std::string, std::pair<int, int>> counts;  // family -> (entries, real slots)
        for (const auto& r : lo.describe()) {
            auto& c = counts[family_name(r.family)];
            c.first += 1;
            c.second += r.real ? 1 : 2;
        }
        CsvTable t;
        t.header = {"family", "entries", "real_slots"};
        int entries = 0;
        for (const auto& [name, c] : counts) {
            t.rows.push_back({name, format_int(c.first), format_int(c.second)});
            entries += c.first;
        }
        t.rows.push_back({"total", format_int(entries), format_int(lo.total_real_count)});
        const std::string csv = (std::filesystem::path(out_dir) / "inventory.csv").string();
        write_csv(csv, t);
        json cfg{{"order", to_string(order)}, {"clusters", clusters}};
        write_metadata(csv, "inventory", cfg.dump(), timer.seconds());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cumulant-expansion simulation of a driven cavity coupled to a "
                 "two-level spin ensemble"};
    app.require_subcommand(1);

    std::string config_path, out_dir, order_flag;
    int workers = 0;
    bool svg = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--workers", workers, "worker thread count (overrides config)");
    app.add_option("--order", order_flag, "closure order: ce1|ce2|ce3 (overrides config)")
        ->check(CLI::IsMember({"ce1", "ce2", "ce3"}));
    app.add_flag("--svg", svg, "also write SVG line charts");

    auto* c_steady = app.add_subcommand("steady", "semiclassical stationary curves");
    auto* c_evolve = app.add_subcommand("evolve", "cumulant time traces");
    auto* c_scan = app.add_subcommand("scan", "stationary photon number vs drive");
    auto* c_normalized =
        app.add_subcommand("normalized", "normalized stationary amplitude vs N");
    auto* c_boundary = app.add_subcommand("boundary", "semiclassical-to-quantum boundary");
    auto* c_oracle = app.add_subcommand("oracle-verify",
                                        "equation residuals against the exact solver");
    auto* c_inventory = app.add_subcommand("inventory", "tracked-variable counts");
    for (auto* s : {c_steady, c_evolve, c_scan, c_normalized, c_boundary, c_oracle,
                    c_inventory})
        s->fallthrough();

    int spins = 2, trials = 20, cutoff = 12, clusters = 1;
    unsigned long long seed = 1;
    c_oracle->add_option("--spins", spins, "number of oracle spins");
    c_oracle->add_option("--trials", trials, "random density matrices per partition");
    c_oracle->add_option("--seed", seed, "random seed");
    c_oracle->add_option("--cutoff", cutoff, "photon Fock cutoff");
    c_inventory->add_option("--clusters", clusters, "cluster count L");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "inventory") {
            CumulantOrder o = order_flag.empty() ? CumulantOrder::CE3
                                                 : parse_order(order_flag);
            return run_inventory(out_dir.empty() ? "." : out_dir, o, clusters,
                                 !out_dir.empty());
        }
        if (sub == "oracle-verify")
            return run_oracle_verify(out_dir.empty() ? "." : out_dir, spins, trials, seed,
                                     cutoff, !out_dir.empty());

        if (config_path.empty()) {
            std::fprintf(stderr, "error: --config is required for '%s'\n", sub.c_str());
            return 2;
        }
        RunConfig rc = parse_config(config_path, sub);
        if (!out_dir.empty()) rc.out_dir = out_dir;
        if (workers > 0) rc.workers = workers;
        if (!order_flag.empty()) rc.order = parse_order(order_flag);
        if (svg) rc.svg = true;
        rc.resolved["output_dir"] = rc.out_dir;
        rc.resolved["workers"] = rc.workers;
        rc.resolved["order"] = to_string(rc.order);
        rc.resolved["svg"] = rc.svg;

        if (sub == "steady") return run_steady(rc);
        if (sub == "evolve") return run_evolve(rc);
        if (sub == "scan") return run_scan(rc);
        if (sub == "normalized") return run_normalized(rc);
        if (sub == "boundary") return run_boundary(rc);
        std::fprintf(stderr, "error: unknown subcommand '%s'\n", sub.c_str());
        return 2;
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const invalid_parameter& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const basin_exhausted& e) {
        std::fprintf(stderr, "non-convergence: %s\n", e.what());
        return exit_for_attempts(e.attempts);
    } catch (const no_convergence& e) {
        std::fprintf(stderr, "non-convergence: %s\n", e.what());
        return 3;
    } catch (const boundary_not_found& e) {
        std::fprintf(stderr, "boundary not found: %s\n", e.what());
        return 3;
    } catch (const stiffness_error& e) {
        std::fprintf(stderr, "unphysical: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
