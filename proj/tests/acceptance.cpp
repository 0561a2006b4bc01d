#include "ugibbs/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace ugibbs;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Tolerances, pinned.
constexpr double kHvolRel = 0.02;
constexpr double kHvolSeconds = 10.0;
constexpr double kEqualityRel = 0.03;
constexpr double kLebesgueL1 = 0.03;
constexpr std::size_t kBatteryMin = 10;
constexpr double kSeedDistance = 0.05;
constexpr int kSeedDepth = 6;
constexpr long kCesaroN = 2000;
constexpr long kCesaroParticles = 500;
constexpr double kMarginMin = 0.1;
constexpr double kFillMin = 0.99;
constexpr double kWindowMass = 0.1;
constexpr double kModifiedAverage = -0.43;
constexpr double kDeltaA = 0.1;
constexpr double kCenterSlack = 0.05;
constexpr long kCenterSteps = 1000000;
constexpr double kFranksResidual = 1e-6;
constexpr double kHolonomyKs = 0.05;
constexpr double kBranchSpread = 0.02;
constexpr double kPfTol = 1e-9;
constexpr double kSymbolicRel = 0.05;
constexpr double kSuiteSeconds = 600.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what) {
    std::printf("%s %2d %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// A malformed summary fails the criterion being evaluated.
template <class F>
void guarded(int id, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        report(id, false, std::string("evaluation error: ") + e.what());
    }
}

struct Scenario {
    json summary;
    fs::path dir;
    double seconds = 0.0;
    bool failed = false;
    std::string error;
};

fs::path config_dir() {
    if (const char* e = std::getenv("UGIBBS_CONFIGS")) return e;
    return "configs";
}

Scenario run(const std::string& name, const fs::path& out) {
    Scenario s;
    s.dir = out;
    const auto t0 = Clock::now();
    try {
        const RunResult r = run_experiment(load_config((config_dir() / (name + ".cfg")).string()), out.string());
        s.summary = r.summary;
        s.failed = r.failed;
    } catch (const std::exception& e) {
        s.failed = true;
        s.error = e.what();
    }
    s.seconds = seconds_since(t0);
    std::printf("  ran %-18s %6.1f s %s\n", name.c_str(), s.seconds, s.error.empty() ? "" : s.error.c_str());
    std::fflush(stdout);
    return s;
}

// Null-safe lookup; returns null when any key is missing.
json at(const json& j, std::initializer_list<const char*> path) {
    const json* p = &j;
    for (const char* k : path) {
        if (!p->is_object() || !p->contains(k)) return nullptr;
        p = &(*p)[k];
    }
    return *p;
}

double num(const json& j, std::initializer_list<const char*> path) {
    const json v = at(j, path);
    return v.is_number() ? v.get<double>() : std::nan("");
}

std::vector<json> rows(const Scenario& s) {
    const json m = at(s.summary, {"tasks", "entropy", "identities", "measures"});
    return m.is_array() ? std::vector<json>(m.begin(), m.end()) : std::vector<json>{};
}

bool is_periodic(const json& row) { return row["name"].get<std::string>().rfind("periodic", 0) == 0; }

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// 1: volume growth of a small seed disk on the plain solenoid.
void topological_entropy() {
    auto chart = make_chart(make_solenoid(3, 0.5, TrigPoly2::circle(0.3)));
    const SystemModel& m = *chart.model;
    Rng rng(20240601);
    std::vector<Vec> o{m.random_point(rng)};
    for (int i = 0; i < 70; ++i) o.push_back(m.map(o.back()));
    const std::vector<Vec> past(o.rbegin() + 1, o.rend());
    const auto t0 = Clock::now();
    bool ok = false;
    std::string msg;
    try {
        const auto disk = grow_unstable_leaf_from(chart, o.back(), past, -0.005, 0.005, 32);
        const VolumeGrowth g = topological_u_entropy(chart, disk, 12);
        const double dt = seconds_since(t0);
        const double rel = std::abs(g.h_vol - std::log(3.0)) / std::log(3.0);
        ok = rel <= kHvolRel && dt <= kHvolSeconds;
        msg = "solenoid h_vol " + fmt("%.5f", g.h_vol) + " vs log 3 (rel " + fmt("%.4f", rel) + "), " +
              fmt("%.2f", dt) + " s";
    } catch (const std::exception& e) {
        msg = std::string("solenoid h_vol: ") + e.what();
    }
    report(1, ok, msg);
}

void gibbs_equality(const Scenario& sol, const Scenario& cat) {
    bool ok = true;
    std::string msg;
    for (const Scenario* s : {&sol, &cat}) {
        const double hb = num(s->summary, {"tasks", "entropy", "identities", "h_base"});
        double worst = 0.0;
        int gibbs = 0;
        for (const auto& r : rows(*s)) {
            if (is_periodic(r)) {
                ok = ok && r["h_cond"].get<double>() == 0.0 && r["status"] == "STRICT";
                continue;
            }
            ++gibbs;
            worst = std::max(worst, std::abs(r["h_cond"].get<double>() - hb) / hb);
        }
        ok = ok && gibbs > 0 && worst <= kEqualityRel;
        msg += at(s->summary, {"system", "family"}).dump() + " max rel gap " + fmt("%.4f", worst) + "; ";
    }
    const double l1 = num(cat.summary, {"tasks", "gibbs", "base_histogram_l1"});
    ok = ok && l1 <= kLebesgueL1;
    msg += "cat histogram L1 " + fmt("%.4f", l1) + "; periodic h_cond exactly 0";
    report(2, ok, msg);
}

void inequality_suite(const std::vector<const Scenario*>& all) {
    bool ok = true;
    std::string msg;
    for (const Scenario* s : all) {
        std::size_t periodic = 0;
        for (const auto& r : rows(*s)) periodic += is_periodic(r);
        const double v = num(s->summary, {"tasks", "entropy", "identities", "violations"});
        ok = ok && periodic >= kBatteryMin && v == 0.0 && !rows(*s).empty();
        msg += s->dir.filename().string() + " " + std::to_string(periodic) + "/" + fmt("%.0f", v) + " ";
    }
    report(3, ok, "periodic measures/violations: " + msg);
}

void uniqueness(const std::vector<const Scenario*>& ss) {
    bool ok = true;
    std::string msg;
    for (const Scenario* s : ss) {
        json g = at(s->summary, {"tasks", "gibbs"});
        const json settled = g["curve_settled_n"];
        const double d = g["seed_distance"].get<double>();
        ok = ok && g["seed_distance_depth"] == kSeedDepth && d < kSeedDistance && settled.is_number() &&
             settled.get<long>() <= kCesaroN && at(s->summary, {"config", "iterations"}) == kCesaroN &&
             at(s->summary, {"config", "particles"}) == kCesaroParticles;
        msg += s->dir.filename().string() + " distance " + fmt("%.4f", d) + " settled n=" + settled.dump() + "; ";
    }
    report(4, ok, msg);
}

void component_count(const Scenario& two, const Scenario& swap) {
    json a = at(two.summary, {"tasks", "skeleton"});
    bool ok = a["components"]["components"] == 2 && a["verification"]["count"] == 2;
    const double margin = num(a, {"structure", "box_margin"});
    ok = ok && margin > kMarginMin;
    double fill = 1.0;
    for (const auto& c : a["structure"]["components"]) fill = std::min(fill, c["leaf_fill"].get<double>());
    ok = ok && fill >= kFillMin;
    json b = at(swap.summary, {"tasks", "skeleton"});
    const json piece = b["structure"]["components"].empty() ? json{} : b["structure"]["components"][0];
    const bool swapped = b["components"]["components"] == 1 && piece.value("connected_components", 0) == 2 &&
                         piece.value("cycle", json::array()) == json{1, 0};
    report(5, ok && swapped,
           "two-solenoid components " + a["components"]["components"].dump() + ", skeleton " +
               a["verification"]["count"].dump() + ", margin " + fmt("%.3f", margin) + ", min fill " +
               fmt("%.3f", fill) + "; swap states " + b["components"]["components"].dump() + ", pieces " +
               piece.value("connected_components", json{}).dump() + ", cycle " + piece.value("cycle", json{}).dump());
}

void certificates(const Scenario& sol, const Scenario& mod, const Scenario& da0, const Scenario& da) {
    const json cs = at(sol.summary, {"tasks", "lyapunov", "certificate"});
    const bool sol_ok = cs.is_object() && cs["m"] == 1 && cs["a"].get<double>() <= std::log(0.5) / 2.0 + 1e-12;

    const auto spec = default_modified_solenoid();
    const double nu = circle_conjugacy(BaseMap{spec.k, spec.beta_c}, 30).measure(-spec.eps, spec.eps);
    const json cm = at(mod.summary, {"tasks", "lyapunov", "certificate"});
    double avg = -std::numeric_limits<double>::infinity();
    if (cm.is_object())
        for (const auto& v : cm["averages"]) avg = std::max(avg, v.get<double>());
    const double bigk = num(mod.summary, {"system", "params", "K"});
    const bool mod_ok = cm.is_object() && std::abs(bigk - 4.0) < 1e-9 && nu <= kWindowMass && avg <= kModifiedAverage;

    const json c0 = at(da0.summary, {"tasks", "lyapunov", "certificate"});
    const json c1 = at(da.summary, {"tasks", "lyapunov", "certificate"});
    const double da_delta = c0.is_object() && c1.is_object() ? std::abs(c1["a"].get<double>() - c0["a"].get<double>())
                                                             : std::nan("");
    const bool da_ok = da_delta < kDeltaA;
    report(6, sol_ok && mod_ok && da_ok,
           "solenoid a " + (cs.is_object() ? fmt("%.4f", cs["a"].get<double>()) : "none") + "; modified nu " +
               fmt("%.4f", nu) + " K " + fmt("%.2f", bigk) + " average " + fmt("%.4f", avg) +
               "; DA |delta a| " + fmt("%.4f", da_delta));
}

void center_bound(const Scenario& da) {
    json l = at(da.summary, {"tasks", "lyapunov"});
    const double top = num(l, {"cs_top"}), bound = num(l, {"center_bound", "log_kappa2"});
    const double res = num(da.summary, {"tasks", "verify", "factor", "residual"});
    const bool ok = l.value("steps", 0L) >= kCenterSteps && top <= bound + kCenterSlack && bound < 0.0 &&
                    res < kFranksResidual && at(da.summary, {"tasks", "verify", "factor", "kind"}) == "franks_series";
    report(7, ok, "DA lambda_c " + fmt("%.4f", top) + " <= log kappa2 " + fmt("%.4f", bound) + " + 0.05 over " +
                      std::to_string(l.value("steps", 0L)) + " steps; Franks residual " + fmt("%.2e", res));
}

// 8: holonomy, branch weights and PF entropy through the library directly.
void reference_structure() {
    DerivedAnosovSpec spec;
    spec.matrix = default_da_matrix();
    spec.amplitude = 0.05;
    auto chart = make_chart(make_derived_anosov(spec));
    const SystemModel& m = *chart.model;
    Rng rng(12);
    double ks = 1.0;
    for (int tries = 0; tries < 20 && ks == 1.0; ++tries) {
        const Vec x = m.random_point(rng);
        auto px = plaque_of(chart, x, 64);
        auto py = plaque_of(chart, m.wrap(x + 0.01 * m.linear->stable_basis.col(1)), 64);
        if (px.cell_id != py.cell_id) continue;
        const double a = px.t_lo + 0.1 * px.length(), b = px.t_hi - 0.1 * px.length();
        const double shift = cs_holonomy_t(chart, px, py, a);
        const double span = cs_holonomy_t(chart, px, py, b) - shift;
        std::vector<double> u;
        const int n = 1000;
        for (int i = 0; i < n; ++i) {
            const double tau = cs_holonomy_t(chart, px, py, a + (b - a) * (i + rng.uniform()) / n);
            const Vec z = m.wrap(leaf_point_at_t(chart, py, tau));
            const Vec d = chart.cells->displacement(py.base_anchor, chart.pi->evaluate(z));
            u.push_back((chart.cells->unstable_coordinate(d) - shift) / span);
        }
        ks = ks_uniform(u);
    }

    IMat cat(2, 2);
    cat << 2, 1, 1, 1;
    auto cat_chart = make_chart(make_linear_torus(hyperbolic_split(cat)));
    std::vector<UnstablePlaque> in_cell;
    Rng r2(11);
    while (in_cell.size() < 10) {
        auto pl = plaque_of(cat_chart, cat_chart.model->random_point(r2), 8);
        if (pl.cell_id == 0) in_cell.push_back(pl);
    }
    const double spread = branch_weight_spread(cat_chart, in_cell);

    double pf = 0.0;
    for (const auto& c : {make_chart(make_solenoid(3, 0.5, TrigPoly2::circle(0.3))), cat_chart,
                          make_chart(make_modified_solenoid(default_modified_solenoid()).first)})
        pf = std::max(pf, std::abs(c.base_entropy() - std::log(c.cells->pf_eigenvalue())));
    report(8, ks < kHolonomyKs && spread <= kBranchSpread && pf < kPfTol,
           "DA holonomy KS " + fmt("%.4f", ks) + "; cat branch spread " + fmt("%.2e", spread) +
               "; PF vs eigen entropy " + fmt("%.1e", pf));
}

void hyperbolic_times_and_symbolic(const std::vector<const Scenario*>& all, const Scenario& sol,
                                   const std::vector<const Scenario*>& constant) {
    bool ok = true;
    std::string msg;
    for (const Scenario* s : all) {
        const json h = at(s->summary, {"tasks", "lyapunov", "hyperbolic_times"});
        if (!h.is_object()) continue;
        if (h["average"].get<double>() < h["a"].get<double>()) ok = ok && h["density"].get<double>() > 0.0;
        msg += s->dir.filename().string() + " " + fmt("%.3f", h["density"].get<double>()) + " ";
    }
    for (const Scenario* s : constant)
        ok = ok && num(s->summary, {"tasks", "lyapunov", "hyperbolic_times", "density"}) == 1.0;
    double worst = std::nan("");
    for (const auto& r : rows(sol)) {
        if (is_periodic(r)) continue;
        const double hc = r["h_cond"].get<double>();
        const double rel = std::abs(r["h_total_symbolic"].get<double>() - hc) / hc;
        worst = std::isnan(worst) ? rel : std::max(worst, rel);
    }
    ok = ok && worst <= kSymbolicRel;
    report(9, ok, "hyperbolic-time densities " + msg + "; solenoid symbolic vs h_cond rel " + fmt("%.4f", worst));
}

void determinism(const Scenario& a, const Scenario& b, double suite_seconds) {
    bool same = !a.failed && !b.failed && canonical_summary(a.summary) == canonical_summary(b.summary);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a.dir)) {
        if (e.path().filename() == "summary.json") continue;
        ++files;
        same = same && fs::exists(b.dir / e.path().filename()) && slurp(e.path()) == slurp(b.dir / e.path().filename());
    }
    report(10, same && suite_seconds < kSuiteSeconds,
           "repeated solenoid run identical (" + std::to_string(files) + " files + summary); shipped suite " +
               fmt("%.1f", suite_seconds) + " s");
}

}  // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / "ugibbs_acceptance";
    fs::remove_all(root);
    set_worker_count(1);

    guarded(1, topological_entropy);

    const Scenario sol = run("solenoid_k3", root / "solenoid_k3");
    const Scenario mod = run("modified_solenoid", root / "modified_solenoid");
    const Scenario two = run("two_solenoid", root / "two_solenoid");
    const Scenario swap = run("swap_solenoid", root / "swap_solenoid");
    const Scenario cat = run("cat_map", root / "cat_map");
    const Scenario da = run("derived_anosov", root / "derived_anosov");
    const Scenario da0 = run("derived_anosov_a0", root / "derived_anosov_a0");
    const Scenario again = run("solenoid_k3", root / "solenoid_k3_again");

    const std::vector<const Scenario*> all{&sol, &mod, &two, &swap, &cat, &da, &da0};
    double suite = 0.0;
    for (const Scenario* s : all) {
        suite += s->seconds;
        if (s->failed) std::printf("  %s: run failed %s\n", s->dir.filename().c_str(), s->error.c_str());
    }

    guarded(2, [&] { gibbs_equality(sol, cat); });
    guarded(3, [&] { inequality_suite(all); });
    guarded(4, [&] { uniqueness({&sol, &mod}); });
    guarded(5, [&] { component_count(two, swap); });
    guarded(6, [&] { certificates(sol, mod, da0, da); });
    guarded(7, [&] { center_bound(da); });
    guarded(8, [&] { reference_structure(); });
    guarded(9, [&] { hyperbolic_times_and_symbolic(all, sol, {&sol, &cat, &da0}); });
    guarded(10, [&] { determinism(sol, again, suite); });
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
