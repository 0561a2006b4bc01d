#include "ugibbs/experiment.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ugibbs {

namespace {

enum class Kind { Int, Real, Bool, Text, IntList };

struct KeyDef {
    std::string name;
    Kind kind;
    std::string fallback;  // empty text with required = true means mandatory
    bool required = false;
};

const std::vector<KeyDef>& run_keys() {
    static const std::vector<KeyDef> keys{
        {"system", Kind::Text, "", true},
        {"seed", Kind::Int, "", true},
        {"tasks", Kind::Text, "verify,gibbs,lyapunov,entropy,skeleton"},
        {"out", Kind::Text, ""},
        {"iterations", Kind::Int, "2000"},
        {"particles", Kind::Int, "500"},
        {"walkers", Kind::Int, "2"},
        {"depth", Kind::Int, "6"},
        {"box_depth", Kind::Int, "6"},
        {"horizon", Kind::Int, "200"},
        {"labelled", Kind::Int, "20000"},
        {"verify_samples", Kind::Int, "2000"},
        {"n_max", Kind::Int, "12"},
        {"lyapunov_steps", Kind::Int, "100000"},
        {"lyapunov_orbits", Kind::Int, "2"},
        {"hyperbolic_blocks", Kind::Int, "2000"},
        {"max_period", Kind::Int, "2"},
        {"probes", Kind::Int, "64"},
        {"battery", Kind::Int, "10"},
        {"battery_period", Kind::Int, "3"},
    };
    return keys;
}

const std::map<std::string, std::vector<KeyDef>>& system_keys() {
    static const std::map<std::string, std::vector<KeyDef>> keys{
        {"solenoid", {{"k", Kind::Int, "3"}, {"a", Kind::Real, "0.5"}, {"b_radius", Kind::Real, "0.3"}}},
        {"modified_solenoid",
         {{"k", Kind::Int, "3"},
          {"a", Kind::Real, "0.5"},
          {"alpha", Kind::Real, "0.7"},
          {"eps", Kind::Real, "0.015"},
          {"beta_c", Kind::Real, "1.5"},
          {"saddle_path", Kind::Bool, "true"},
          {"saddle_unstable", Kind::Real, "4.0"},
          {"saddle_stable", Kind::Real, "0.3"},
          {"saddle_scale", Kind::Real, "0.6"}}},
        {"two_solenoid",
         {{"k", Kind::Int, "3"},
          {"a", Kind::Real, "0.5"},
          {"separation", Kind::Real, "0.5"},
          {"radius", Kind::Real, "0.45"},
          {"b_scale", Kind::Real, "0.1"},
          {"swap", Kind::Bool, "false"}}},
        {"derived_anosov",
         {{"matrix", Kind::IntList, "3 1 2 1 1 1 2 1 2"},
          {"amplitude", Kind::Real, "0.05"},
          {"direction", Kind::Int, "1"}}},
        {"cat_map", {{"matrix", Kind::IntList, "2 1 1 1"}}},
    };
    return keys;
}

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long parse_int(const std::string& key, const std::string& v) {
    long out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) config_error(key + ": not an integer: " + v);
    return out;
}

nlohmann::json typed(const KeyDef& def, const std::string& v) {
    switch (def.kind) {
        case Kind::Int:
            if (def.name == "seed") {
                std::uint64_t s = 0;
                const auto r = std::from_chars(v.data(), v.data() + v.size(), s);
                if (r.ec != std::errc() || r.ptr != v.data() + v.size()) config_error("seed: not an unsigned integer: " + v);
                return s;
            }
            return parse_int(def.name, v);
        case Kind::Real: {
            try {
                std::size_t used = 0;
                const double d = std::stod(v, &used);
                if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
                return d;
            } catch (const std::exception&) {
                config_error(def.name + ": not a number: " + v);
            }
        }
        case Kind::Bool:
            if (v == "true" || v == "1") return true;
            if (v == "false" || v == "0") return false;
            config_error(def.name + ": expected true or false: " + v);
        case Kind::Text: return v;
        case Kind::IntList: {
            std::istringstream is(v);
            std::vector<long> out;
            std::string tok;
            while (is >> tok) out.push_back(parse_int(def.name, tok));
            if (out.empty()) config_error(def.name + ": empty list");
            return out;
        }
    }
    return nullptr;
}

const KeyDef* find_key(const std::string& system, const std::string& key) {
    for (const auto& d : run_keys())
        if (d.name == key) return &d;
    auto it = system_keys().find(system);
    if (it != system_keys().end())
        for (const auto& d : it->second)
            if (d.name == key) return &d;
    return nullptr;
}

IMat square_matrix(const nlohmann::json& list) {
    const auto v = list.get<std::vector<long>>();
    const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(v.size()))));
    if (d * d != static_cast<int>(v.size()) || d < 2) config_error("matrix: need d*d integers");
    IMat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(i * d + j)];
    return m;
}

std::vector<double> as_vector(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

UnstablePlaque seed_plaque(const FactorChart& chart, const Vec& x0, std::vector<Vec>* past_out = nullptr) {
    std::vector<Vec> o{x0};
    for (int i = 0; i < 70; ++i) o.push_back(chart.model->map(o.back()));
    const std::vector<Vec> past(o.rbegin() + 1, o.rend());
    if (past_out) *past_out = past;
    return plaque_of_from(chart, o.back(), past, 64);
}

// One start per disk on multi-disk systems (so every sub-attractor is seeded), otherwise random.
std::vector<Vec> seed_points(const SystemModel& m, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> out;
    if (m.disks.size() >= 2) {
        for (const Disk& d : m.disks) {
            Vec x(3);
            x << rng.uniform(), d.center[0] + 0.1 * d.radius * (rng.uniform() - 0.5),
                d.center[1] + 0.1 * d.radius * (rng.uniform() - 0.5);
            out.push_back(x);
        }
    } else {
        out.push_back(m.random_point(rng));
        out.push_back(m.random_point(rng));
    }
    return out;
}

std::string now_utc() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Context {
    const ExperimentConfig& cfg;
    std::filesystem::path dir;
    std::shared_ptr<SystemModel> model;
    FactorChart chart;
    std::vector<ParticleMeasure> states;  // Cesaro states per seed plaque
    ParticleMeasure pooled;
    std::vector<Vec> starts;
    nlohmann::json checks = nlohmann::json::object();
};

nlohmann::json run_verify(Context& c) {
    const SystemModel& m = *c.model;
    const std::uint64_t s = mix_seed(c.cfg.seed(), 1);
    const auto samples = static_cast<std::size_t>(c.cfg.integer("verify_samples"));
    const ConeReport cone = verify_partial_hyperbolicity(m, samples, s);
    nlohmann::json j;
    j["cones"] = {{"pass", cone.pass},
                  {"samples", cone.samples},
                  {"min_expansion", cone.min_expansion},
                  {"max_omega", cone.max_omega},
                  {"max_domination_ratio", cone.max_domination_ratio},
                  {"max_cone_ratio", cone.max_cone_ratio},
                  {"min_partial_volume", finite_or_null(cone.min_partial_volume)}};
    if (!cone.pass)
        j["cones"]["witness"] = {{"point", as_vector(cone.witness_point)}, {"vector", as_vector(cone.witness_vector)}};
    j["derivative_fd_error"] = derivative_fd_error(m, 200, s);
    j["inverse_residual"] = inverse_residual(m, 200, s);
    // linear tori are their own factor; skew products get the itinerary map of the reference solenoid
    SemiConjugacy pi;
    double residual = 0.0;
    if (c.chart.pi) {
        pi = *c.chart.pi;
        residual = franks_residual(m, pi, 200, s);
    } else if (m.skew) {
        pi = skew_semiconjugacy(m, 40);
        residual = skew_residual(m, pi, 200, s);
    }
    j["factor"] = {{"kind", kind_name(pi.kind)},
                   {"residual", residual},
                   {"tolerance", pi.tolerance},
                   {"base_entropy", c.chart.base_entropy()},
                   {"pf_entropy", std::log(c.chart.cells->pf_eigenvalue())},
                   {"markov", c.chart.cells->is_markov()}};
    c.checks["verify.cones"] = cone.pass;
    c.checks["verify.factor_residual"] = residual < 1e-6;
    return j;
}

nlohmann::json run_gibbs(Context& c) {
    const SystemModel& m = *c.model;
    CesaroOptions opt;
    opt.iterations = static_cast<int>(c.cfg.integer("iterations"));
    opt.particles = static_cast<int>(c.cfg.integer("particles"));
    opt.walkers = static_cast<int>(c.cfg.integer("walkers"));
    opt.depth = static_cast<int>(c.cfg.integer("depth"));
    c.starts = seed_points(m, mix_seed(c.cfg.seed(), 2));
    nlohmann::json j;
    std::vector<CurvePoint> curve;
    for (std::size_t i = 0; i < c.starts.size(); ++i) {
        opt.curve = i == 0;
        auto r = cesaro_state(c.chart, seed_plaque(c.chart, c.starts[i]), opt, mix_seed(c.cfg.seed(), 10 + i));
        if (i == 0) curve = r.curve;
        c.states.push_back(std::move(r.measure));
    }
    c.pooled = c.states[0];
    if (m.disks.size() >= 2) {
        for (std::size_t i = 1; i < c.states.size(); ++i) c.pooled.append(c.states[i], 1.0);
        c.pooled.normalize();
    }

    const int depth = static_cast<int>(c.cfg.integer("depth"));
    const int d = feasible_depth(c.chart, c.states[0], c.states[1], depth);
    j["seed_distance"] = d > 0 ? nlohmann::json(weak_distance(c.chart, c.states[0], c.states[1], d)) : nlohmann::json(nullptr);
    j["seed_distance_depth"] = d;
    nlohmann::json cj = nlohmann::json::array();
    // first n from which every later point of the curve stays below 0.05
    nlohmann::json settled = nullptr;
    for (const auto& p : curve) {
        cj.push_back({{"n", p.n}, {"distance", finite_or_null(p.distance)}});
        if (!(p.distance < 0.05)) settled = nullptr;
        else if (settled.is_null()) settled = p.n;
    }
    j["convergence_curve"] = cj;
    j["curve_settled_n"] = settled;
    j["base_histogram_l1"] = base_histogram_distance(c.chart, c.states[0], depth);
    j["particles"] = c.pooled.size();
    j["states"] = c.states.size();

    ComponentOptions copt;
    copt.horizon = static_cast<int>(c.cfg.integer("horizon"));
    copt.box_depth = static_cast<int>(c.cfg.integer("box_depth"));
    copt.distance_depth = depth;
    copt.max_labelled = static_cast<std::size_t>(c.cfg.integer("labelled"));
    const GibbsReport g = ergodic_components(c.chart, c.states[0], {}, copt, &c.states[1]);
    j["two_seed_status"] = status_name(g.status);

    std::ofstream os(c.dir / "gibbs_curve.csv");
    os << std::setprecision(17) << "n,distance\n";
    for (const auto& p : curve) os << p.n << ',' << p.distance << '\n';
    write_measure_csv(c.pooled.subset(spread_subsample(c.pooled.size(), 20000)), (c.dir / "gibbs_sample.csv").string());
    return j;
}

nlohmann::json run_lyapunov(Context& c) {
    const SystemModel& m = *c.model;
    const std::uint64_t s = mix_seed(c.cfg.seed(), 3);
    LyapunovReport r = lyapunov_spectrum(m, c.pooled, c.cfg.integer("lyapunov_steps"), s,
                                         static_cast<int>(c.cfg.integer("lyapunov_orbits")));
    const CertificateResult cert = c_mostly_certificate(m, c.states);
    r.certificate = cert.certificate;
    nlohmann::json ht = nullptr;
    if (cert.certificate) {
        const Vec x = c.states[0].points.col(0);
        const auto h = hyperbolic_times(m, x, c.cfg.integer("hyperbolic_blocks"), cert.certificate->a, cert.certificate->m);
        r.hyperbolic_time_fraction = h.density;
        r.stable_size_bound = h.stable_size_bound;
        ht = {{"a", cert.certificate->a},
              {"block", cert.certificate->m},
              {"density", h.density},
              {"average", h.average},
              {"pliss_bound", h.pliss_bound}};
    }
    nlohmann::json j = lyapunov_json(r);
    j["hyperbolic_times"] = ht;
    if (!cert.certificate) j["failing"] = {{"state", cert.failing_state}, {"value", cert.failing_value}};
    if (m.family == "derived_anosov") {
        const double bound = std::log(m.linear->stable_rates.maxCoeff());
        j["center_bound"] = {{"log_kappa2", bound}, {"holds", r.cs_top <= bound + 0.05}};
    }
    c.checks["lyapunov.certificate"] = cert.certificate.has_value();

    std::ofstream os(c.dir / "lyapunov.csv");
    os << std::setprecision(17) << "index,exponent,half_width\n";
    for (int i = 0; i < r.spectrum.size(); ++i) os << i << ',' << r.spectrum[i] << ',' << r.half_width[i] << '\n';
    return j;
}

nlohmann::json run_entropy(Context& c) {
    const SystemModel& m = *c.model;
    nlohmann::json j;
    std::vector<Vec> past;
    seed_plaque(c.chart, c.starts[0], &past);
    const Vec x = m.iterate(c.starts[0], 70);
    const auto disk = grow_unstable_leaf_from(c.chart, x, past, -0.005, 0.005, 32);
    const VolumeGrowth g = topological_u_entropy(c.chart, disk, static_cast<int>(c.cfg.integer("n_max")));
    j["h_vol"] = g.h_vol;
    j["h_vol_stderr"] = g.stderr_;
    j["n_max"] = c.cfg.integer("n_max");
    write_growth_csv(g, (c.dir / "growth.csv").string());

    const bool certified = c_mostly_certificate(m, c.states).certificate.has_value();
    std::vector<BatteryEntry> battery;
    for (std::size_t i = 0; i < c.states.size(); ++i)
        battery.push_back({"gibbs" + std::to_string(i), c.states[i], certified});
    const auto found = find_periodic(c.chart, static_cast<int>(c.cfg.integer("battery_period")));
    const auto pick = spread_subsample(found.orbits.size(), static_cast<std::size_t>(c.cfg.integer("battery")));
    for (std::size_t i : pick) {
        const auto& o = found.orbits[i];
        battery.push_back({"periodic_p" + std::to_string(o.period) + "_" + std::to_string(i),
                           periodic_measure(c.chart, o.orbit), o.contracting_count == m.cs_dim});
    }
    const EntropyReport rep = entropy_identities(c.chart, battery);
    j["identities"] = entropy_json(rep);
    j["periodic_measures"] = pick.size();
    write_entropy_csv(rep, (c.dir / "entropy.csv").string());
    c.checks["entropy.no_violations"] = rep.violations == 0;
    return j;
}

nlohmann::json run_skeleton(Context& c) {
    const SystemModel& m = *c.model;
    nlohmann::json j;
    SkeletonOptions so;
    so.horizon = static_cast<int>(c.cfg.integer("horizon"));
    so.probes = static_cast<int>(c.cfg.integer("probes"));
    const auto found = find_periodic(c.chart, static_cast<int>(c.cfg.integer("max_period")));
    const auto sk = select_skeleton(c.chart, found.orbits, so);
    const SkeletonReport rep = verify_skeleton(c.chart, sk, mix_seed(c.cfg.seed(), 4), so);
    j["search"] = {{"max_period", found.max_period},
                   {"orbits", found.orbits.size()},
                   {"seeds", found.seeds},
                   {"divergent", found.divergent}};
    j["verification"] = skeleton_json(rep);

    ComponentOptions copt;
    copt.horizon = so.horizon;
    copt.box_depth = static_cast<int>(c.cfg.integer("box_depth"));
    copt.distance_depth = static_cast<int>(c.cfg.integer("depth"));
    copt.max_labelled = static_cast<std::size_t>(c.cfg.integer("labelled"));
    std::vector<BasinTarget> targets;
    for (const auto& s : sk) targets.push_back(basin_target(s, so.u_radius));
    const GibbsReport g = ergodic_components(c.chart, c.pooled, targets, copt);
    j["components"] = report_json(g);
    StructureOptions sto;
    sto.box_depth = copt.box_depth;
    const StructureReport st = support_structure(c.chart, g, sk, sto);
    j["structure"] = structure_json(st);
    j["count_matches"] = g.components.size() == sk.size();

    c.checks["skeleton.not_fail"] = rep.status != SkeletonStatus::Fail;
    c.checks["skeleton.count_matches"] = g.components.size() == sk.size();

    std::ofstream os(c.dir / "skeleton.csv");
    os << std::setprecision(17) << "index,period";
    for (int i = 0; i < m.state_dim; ++i) os << ",x" << i;
    os << ",contracting_count,stable_size,basin_hits\n";
    for (std::size_t i = 0; i < sk.size(); ++i) {
        os << i << ',' << sk[i].period;
        for (int k = 0; k < m.state_dim; ++k) os << ',' << sk[i].point[k];
        os << ',' << sk[i].contracting_count << ',' << sk[i].stable_size_estimate << ',' << rep.basin_hits[i] << '\n';
    }
    return j;
}

nlohmann::json read_summary(const std::string& dir) {
    std::ifstream is(std::filesystem::path(dir) / "summary.json");
    if (!is) throw Error(ErrorCode::ConfigError, "no summary.json in " + dir);
    return nlohmann::json::parse(is);
}

const nlohmann::json* at_path(const nlohmann::json& j, const std::vector<std::string>& path) {
    const nlohmann::json* cur = &j;
    for (const auto& p : path) {
        if (!cur->is_object() || !cur->contains(p)) return nullptr;
        cur = &(*cur)[p];
    }
    return cur;
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::ostringstream& os) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), os);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", os);
    } else {
        os << prefix << ',' << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
    }
}

}  // namespace

long ExperimentConfig::integer(const std::string& key) const { return values.at(key).get<long>(); }
double ExperimentConfig::real(const std::string& key) const { return values.at(key).get<double>(); }
bool ExperimentConfig::flag(const std::string& key) const { return values.at(key).get<bool>(); }
std::string ExperimentConfig::text(const std::string& key) const { return values.at(key).get<std::string>(); }
std::uint64_t ExperimentConfig::seed() const { return values.at("seed").get<std::uint64_t>(); }

std::vector<std::string> ExperimentConfig::tasks() const {
    std::vector<std::string> out;
    std::istringstream is(text("tasks"));
    std::string t;
    while (std::getline(is, t, ',')) {
        t = trim(t);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values) j[k] = v;
    return j;
}

ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> raw;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) config_error("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) config_error("line " + std::to_string(lineno) + ": empty key or value");
        if (!raw.emplace(key, value).second) config_error("duplicate key: " + key);
    }
    ExperimentConfig cfg;
    auto sys = raw.find("system");
    if (sys == raw.end()) config_error("missing key: system");
    cfg.system = sys->second;
    if (!system_keys().count(cfg.system)) config_error("unknown system: " + cfg.system);
    for (const auto& [k, v] : raw) {
        const KeyDef* def = find_key(cfg.system, k);
        if (!def) config_error("unknown key for " + cfg.system + ": " + k);
        cfg.values[k] = typed(*def, v);
    }
    auto fill = [&](const std::vector<KeyDef>& defs) {
        for (const auto& d : defs) {
            if (cfg.values.count(d.name)) continue;
            if (d.required) config_error("missing key: " + d.name);
            cfg.values[d.name] = typed(d, d.fallback.empty() && d.kind == Kind::Text ? "" : d.fallback);
        }
    };
    fill(run_keys());
    fill(system_keys().at(cfg.system));
    static const std::set<std::string> known{"verify", "gibbs", "lyapunov", "entropy", "skeleton"};
    for (const auto& t : cfg.tasks())
        if (!known.count(t)) config_error("unknown task: " + t);
    for (const char* k : {"iterations", "particles", "walkers", "depth", "box_depth", "horizon", "n_max",
                          "lyapunov_steps", "lyapunov_orbits", "max_period", "probes", "battery_period"})
        if (cfg.integer(k) < 1) config_error(std::string(k) + " must be positive");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) config_error("cannot read config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

void override_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const KeyDef* def = find_key(cfg.system, key);
    if (!def || key == "system") config_error("cannot override key: " + key);
    cfg.values[key] = typed(*def, value);
}

SystemModel build_system(const ExperimentConfig& cfg) {
    const std::string& s = cfg.system;
    if (s == "solenoid")
        return make_solenoid(static_cast<int>(cfg.integer("k")), cfg.real("a"), TrigPoly2::circle(cfg.real("b_radius")));
    if (s == "modified_solenoid") {
        ModifiedSolenoidSpec spec = default_modified_solenoid();
        spec.k = static_cast<int>(cfg.integer("k"));
        spec.a = cfg.real("a");
        spec.alpha = cfg.real("alpha");
        spec.eps = cfg.real("eps");
        spec.beta_c = cfg.real("beta_c");
        spec.saddle_path = cfg.flag("saddle_path");
        spec.saddle_unstable = cfg.real("saddle_unstable");
        spec.saddle_stable = cfg.real("saddle_stable");
        spec.saddle_scale = cfg.real("saddle_scale");
        return make_modified_solenoid(spec).first;
    }
    if (s == "two_solenoid") {
        TwoSolenoidSpec spec;
        spec.k = static_cast<int>(cfg.integer("k"));
        spec.a = cfg.real("a");
        spec.separation = cfg.real("separation");
        spec.radius = cfg.real("radius");
        spec.b_scale = cfg.real("b_scale");
        spec.swap = cfg.flag("swap");
        return make_two_solenoid(spec);
    }
    if (s == "derived_anosov") {
        DerivedAnosovSpec spec;
        spec.matrix = square_matrix(cfg.values.at("matrix"));
        spec.amplitude = cfg.real("amplitude");
        spec.direction = static_cast<int>(cfg.integer("direction"));
        return make_derived_anosov(spec);
    }
    if (s == "cat_map") {
        const IMat a = square_matrix(cfg.values.at("matrix"));
        if (a.rows() != 2) config_error("cat_map: need a 2x2 matrix");
        return make_linear_torus(hyperbolic_split(a));
    }
    config_error("unknown system: " + s);
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto model = std::make_shared<SystemModel>(build_system(cfg));
    Context c{cfg, out_dir, model, make_chart(*model), {}, {}, {}, nlohmann::json::object()};

    nlohmann::json summary;
    summary["schema_version"] = 1;
    summary["timestamp"] = now_utc();
    summary["config"] = cfg.to_json();
    summary["system"] = {{"family", model->family},
                         {"state_dim", model->state_dim},
                         {"uu_dim", model->uu_dim},
                         {"cs_dim", model->cs_dim},
                         {"params", model->params},
                         {"warnings", model->warnings}};
    const auto tasks = cfg.tasks();
    auto wanted = [&](const std::string& t) { return std::find(tasks.begin(), tasks.end(), t) != tasks.end(); };
    const bool need_gibbs = wanted("gibbs") || wanted("lyapunov") || wanted("entropy") || wanted("skeleton");
    nlohmann::json out = nlohmann::json::object();
    if (wanted("verify")) out["verify"] = run_verify(c);
    if (need_gibbs) {
        nlohmann::json g = run_gibbs(c);
        if (wanted("gibbs")) out["gibbs"] = std::move(g);
    }
    if (wanted("lyapunov")) out["lyapunov"] = run_lyapunov(c);
    if (wanted("entropy")) out["entropy"] = run_entropy(c);
    if (wanted("skeleton")) out["skeleton"] = run_skeleton(c);
    summary["tasks"] = out;
    summary["checks"] = c.checks;
    bool failed = false;
    for (const auto& [k, v] : c.checks.items())
        if (!v.get<bool>()) failed = true;
    summary["status"] = failed ? "FAIL" : "PASS";

    std::ofstream os(std::filesystem::path(out_dir) / "summary.json");
    os << summary.dump(2) << '\n';
    return {summary, failed};
}

nlohmann::json compare_runs(const std::string& dir_a, const std::string& dir_b) {
    const nlohmann::json a = read_summary(dir_a), b = read_summary(dir_b);
    const auto& sa = a["system"];
    const auto& sb = b["system"];
    if (sa["family"] != sb["family"] || sa["state_dim"] != sb["state_dim"] || sa["cs_dim"] != sb["cs_dim"])
        throw Error(ErrorCode::IncompatibleSystems,
                    "cannot compare " + sa["family"].get<std::string>() + " with " + sb["family"].get<std::string>());

    const std::vector<std::pair<std::string, std::vector<std::string>>> fields{
        {"certificate_m", {"tasks", "lyapunov", "certificate", "m"}},
        {"certificate_a", {"tasks", "lyapunov", "certificate", "a"}},
        {"cs_top", {"tasks", "lyapunov", "cs_top"}},
        {"h_vol", {"tasks", "entropy", "h_vol"}},
        {"h_base", {"tasks", "entropy", "identities", "h_base"}},
        {"components", {"tasks", "skeleton", "components", "components"}},
        {"skeleton_points", {"tasks", "skeleton", "verification", "count"}},
        {"status", {"status"}},
    };
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json diff = nlohmann::json::array();
    for (const auto& [name, path] : fields) {
        const auto* va = at_path(a, path);
        const auto* vb = at_path(b, path);
        const nlohmann::json ja = va ? *va : nlohmann::json(nullptr), jb = vb ? *vb : nlohmann::json(nullptr);
        rows.push_back({{"field", name}, {"a", ja}, {"b", jb}});
        if (ja != jb) diff.push_back({{"field", name}, {"a", ja}, {"b", jb}});
    }
    auto cert = [](const nlohmann::json& s) {
        const auto* c = at_path(s, {"tasks", "lyapunov", "certificate"});
        return c && !c->is_null();
    };
    nlohmann::json out{{"a", dir_a}, {"b", dir_b}, {"rows", rows}, {"diff", diff}};
    out["certificate_lost"] = cert(a) != cert(b);
    if (cert(a) && cert(b))
        out["delta_a"] = std::abs(a["tasks"]["lyapunov"]["certificate"]["a"].get<double>() -
                                  b["tasks"]["lyapunov"]["certificate"]["a"].get<double>());
    return out;
}

nlohmann::json list_systems() {
    auto defs = [](const std::vector<KeyDef>& keys) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& d : keys) j[d.name] = d.required ? nlohmann::json("required") : nlohmann::json(d.fallback);
        return j;
    };
    nlohmann::json j;
    for (const auto& [name, keys] : system_keys()) j["systems"][name] = defs(keys);
    j["run_keys"] = defs(run_keys());
    return j;
}

std::string canonical_summary(const nlohmann::json& summary) {
    nlohmann::json s = summary;
    s.erase("timestamp");
    return s.dump(2);
}

std::string flatten_csv(const nlohmann::json& j) {
    std::ostringstream os;
    os << std::setprecision(17) << "key,value\n";
    flatten(j, "", os);
    return os.str();
}

}  // namespace ugibbs
