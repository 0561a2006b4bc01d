#include "ugibbs/systems.hpp"

#include <algorithm>

namespace ugibbs {

TrigPoly2 TrigPoly2::circle(double radius) {
    TrigPoly2 b;
    b.terms.push_back({radius, 0.0, 0.0, radius});
    return b;
}

Eigen::Vector2d TrigPoly2::derivative(double theta) const {
    Eigen::Vector2d out(0.0, 0.0);
    for (std::size_t n = 0; n < terms.size(); ++n) {
        const double f = kTwoPi * static_cast<double>(n + 1);
        const double w = f * theta;
        const auto& t = terms[n];
        out[0] += f * (-t[0] * std::sin(w) + t[1] * std::cos(w));
        out[1] += f * (-t[2] * std::sin(w) + t[3] * std::cos(w));
    }
    return out;
}

double TrigPoly2::sup_norm() const {
    const int n = 4096;
    int arg = 0;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = eval(static_cast<double>(i) / n).norm();
        if (v > best) {
            best = v;
            arg = i;
        }
    }
    // Golden-section refinement around the best grid sample.
    double lo = (arg - 1.0) / n, hi = (arg + 1.0) / n;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80; ++it) {
        const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        (eval(m1).norm() < eval(m2).norm() ? lo : hi) = (eval(m1).norm() < eval(m2).norm() ? m1 : m2);
    }
    return std::max(best, eval(0.5 * (lo + hi)).norm());
}

std::vector<double> BaseMap::preimages(double theta) const {
    std::vector<double> out;
    const double y = wrap01(theta);
    for (int j = 0; j < degree; ++j) {
        const double target = y + j;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (lift(mid) < target ? lo : hi) = mid;
        }
        double t = 0.5 * (lo + hi);
        for (int it = 0; it < 2; ++it) t -= (lift(t) - target) / derivative(t);
        out.push_back(wrap01(t));
    }
    return out;
}

Vec SystemModel::wrap(const Vec& x) const {
    Vec y = x;
    for (int i = 0; i < y.size(); ++i)
        if (periodic[i]) y[i] = wrap01(y[i]);
    return y;
}

Vec SystemModel::displacement(const Vec& from, const Vec& to) const {
    Vec d = to - from;
    for (int i = 0; i < d.size(); ++i)
        if (periodic[i]) d[i] = wrap_half(d[i]);
    return d;
}

Vec SystemModel::unwrap_near(const Vec& x, const Vec& ref) const { return ref + displacement(ref, x); }

double SystemModel::domain_margin(const Vec& x) const {
    if (domain == DomainKind::Torus) return std::numeric_limits<double>::infinity();
    const Eigen::Vector2d p(x[1], x[2]);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& d : disks) best = std::max(best, d.margin(p));
    return best;
}

int SystemModel::disk_of(const Vec& x) const {
    if (domain == DomainKind::Torus) return -1;
    const Eigen::Vector2d p(x[1], x[2]);
    int best = -1;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < disks.size(); ++i) {
        const double v = disks[i].margin(p);
        if (v > m) {
            m = v;
            best = static_cast<int>(i);
        }
    }
    return m >= -1e-12 ? best : -1;
}

Vec SystemModel::random_point(Rng& rng) const {
    Vec x(state_dim);
    if (domain == DomainKind::Torus) {
        for (int i = 0; i < state_dim; ++i) x[i] = rng.uniform();
        return x;
    }
    x[0] = rng.uniform();
    const Disk& d = disks[rng.below(disks.size())];
    const double r = d.radius * std::sqrt(rng.uniform()), ang = kTwoPi * rng.uniform();
    x[1] = d.center[0] + r * std::cos(ang);
    x[2] = d.center[1] + r * std::sin(ang);
    return x;
}

Vec SystemModel::random_attractor_point(Rng& rng, int steps) const {
    Vec x = random_point(rng);
    if (domain == DomainKind::Torus) return x;
    return iterate(x, steps);
}

Vec SystemModel::iterate(Vec x, int n) const {
    for (int i = 0; i < n; ++i) x = map(x);
    return x;
}

namespace {

SystemModel skew_model(const std::string& family, SkewProduct sp, double cone) {
    SystemModel m;
    m.family = family;
    m.state_dim = 3;
    m.cs_dim = 2;
    m.uu_dim = 1;
    m.domain = DomainKind::SolidTorus;
    m.periodic = {true, false, false};
    m.cone_aperture = cone;
    m.frame = Mat::Identity(3, 3);
    m.embedding = true;
    m.min_expansion = sp.beta.min_derivative();
    m.disks = sp.disks;
    m.skew = sp;
    auto skew = std::make_shared<SkewProduct>(sp);

    m.map = [skew](const Vec& x) {
        const double th = wrap01(x[0]);
        const Eigen::Vector2d y = skew->fiber(th, Eigen::Vector2d(x[1], x[2]));
        Vec out(3);
        out << skew->beta(th), y[0], y[1];
        return out;
    };
    m.derivative = [skew](const Vec& x) {
        const double th = wrap01(x[0]);
        const Eigen::Vector2d p(x[1], x[2]);
        Mat d = Mat::Zero(3, 3);
        d(0, 0) = skew->beta.derivative(th);
        d.block<2, 1>(1, 0) = skew->fiber_dtheta(th, p);
        d.block<2, 2>(1, 1) = skew->fiber_dx(th, p);
        return d;
    };
    m.base_projection = [](const Vec& x) {
        Vec b(1);
        b << wrap01(x[0]);
        return b;
    };
    m.inverse_on_image = [skew](const Vec& y) -> std::optional<Vec> {
        const Eigen::Vector2d target(y[1], y[2]);
        std::optional<Vec> best;
        double best_margin = -1e-12;
        for (double th : skew->beta.preimages(y[0])) {
            for (const auto& start : skew->disks) {
                Eigen::Vector2d p = start.center;
                bool ok = false;
                for (int it = 0; it < 60; ++it) {
                    const Eigen::Vector2d r = skew->fiber(th, p) - target;
                    if (r.norm() < 1e-15) {
                        ok = true;
                        break;
                    }
                    p -= skew->fiber_dx(th, p).lu().solve(r);
                    if (!p.allFinite()) break;
                }
                if (!ok && (skew->fiber(th, p) - target).norm() > 1e-13) continue;
                double margin = -std::numeric_limits<double>::infinity();
                for (const auto& d : skew->disks) margin = std::max(margin, d.margin(p));
                if (margin > best_margin) {
                    best_margin = margin;
                    Vec x(3);
                    x << th, p[0], p[1];
                    best = x;
                }
            }
        }
        return best;
    };
    return m;
}

}  // namespace

SystemModel make_linear_skew(int k, double a, const TrigPoly2& b) {
    SkewProduct sp;
    sp.beta = BaseMap{k, 0.0};
    sp.fiber = [a, b](double th, const Eigen::Vector2d& x) -> Eigen::Vector2d { return a * x + b.eval(th); };
    sp.fiber_dx = [a](double, const Eigen::Vector2d&) -> Eigen::Matrix2d { return a * Eigen::Matrix2d::Identity(); };
    sp.fiber_dtheta = [b](double th, const Eigen::Vector2d&) -> Eigen::Vector2d { return b.derivative(th); };
    sp.disks = {Disk{Eigen::Vector2d::Zero(), 1.0}};
    sp.ref_a = a;
    sp.ref_b = b;
    SystemModel m = skew_model("linear_skew", sp, 1.0);
    m.params = {{"k", k}, {"a", a}};
    return m;
}

SystemModel make_solenoid(int k, double a, const TrigPoly2& b) {
    if (k < 3) throw Error(ErrorCode::InvalidParameter, "solenoid degree must be >= 3");
    if (!(a > 1.0 / k && a < 1.0)) throw Error(ErrorCode::InvalidParameter, "contraction a must lie in (1/k, 1)");
    const double bsup = b.sup_norm();
    if (a + bsup >= 1.0)
        throw Error(ErrorCode::DomainEscape, "a + sup|b| = " + std::to_string(a + bsup) + " >= 1");
    SystemModel m = make_linear_skew(k, a, b);
    m.family = "solenoid";
    m.params["margin"] = 1.0 - a - bsup;
    return m;
}

ModifiedSolenoidSpec default_modified_solenoid() {
    ModifiedSolenoidSpec s;
    s.b.terms = {{0.0, 0.1, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.1}};
    return s;
}

namespace {

// Smooth bump: 1 at t = 0, 0 for |t| >= width, C^2.
struct Bump {
    double width = 0.9;
    double value(double t) const {
        const double r = std::abs(t) / width;
        if (r >= 1.0) return 0.0;
        return 1.0 - r * r * r * (10.0 - 15.0 * r + 6.0 * r * r);
    }
    double derivative(double t) const {
        const double r = std::abs(t) / width;
        if (r >= 1.0) return 0.0;
        const double dq = -30.0 * r * r * (1.0 - r) * (1.0 - r);
        return dq * (t < 0 ? -1.0 : 1.0) / width;
    }
};

double norm2(const Eigen::Matrix2d& m) { return Eigen::JacobiSVD<Eigen::Matrix2d>(m).singularValues()[0]; }

}  // namespace

std::pair<SystemModel, FiberFamily> make_modified_solenoid(const ModifiedSolenoidSpec& spec) {
    const BaseMap beta{spec.k, spec.beta_c};
    if (beta.min_derivative() <= 1.0) throw Error(ErrorCode::NotExpanding, "min beta' <= 1");
    if (!(spec.eps > 0 && spec.eps < 0.25)) throw Error(ErrorCode::InvalidParameter, "eps must lie in (0, 1/4)");

    const double a = spec.a, eps = spec.eps;
    const Eigen::Matrix2d rot = Eigen::Rotation2Dd(spec.alpha).toRotationMatrix();
    const Eigen::Matrix2d phi_d = a * rot;
    const double ku = spec.saddle_unstable, ks = spec.saddle_stable, sc = spec.saddle_scale;
    const bool saddle = spec.saddle_path;
    const Bump bump;
    const TrigPoly2 b = spec.b;

    auto psi0 = [=](const Eigen::Vector2d& x) -> Eigen::Vector2d { return {sc * std::tanh(ku * x[0] / sc), ks * x[1]}; };
    auto psi0_d = [=](const Eigen::Vector2d& x) -> Eigen::Matrix2d {
        const double c = 1.0 / std::cosh(ku * x[0] / sc);
        Eigen::Matrix2d d;
        d << ku * c * c, 0.0, 0.0, ks;
        return d;
    };
    auto weight = [=](double t) { return saddle ? bump.value(t) : 0.0; };
    auto weight_d = [=](double t) { return saddle ? bump.derivative(t) : 0.0; };
    auto psi = [=](double t, const Eigen::Vector2d& x) -> Eigen::Vector2d {
        const double s = weight(t);
        return (1.0 - s) * (phi_d * x) + s * psi0(x);
    };
    auto psi_d = [=](double t, const Eigen::Vector2d& x) -> Eigen::Matrix2d {
        const double s = weight(t);
        return (1.0 - s) * phi_d + s * psi0_d(x);
    };

    FiberFamily fam;
    fam.base_map = beta;
    fam.k = spec.k;
    fam.a = a;
    fam.alpha = spec.alpha;
    fam.eps = eps;
    fam.saddle_unstable = ku;
    fam.saddle_stable = ks;
    fam.saddle_scale = sc;
    fam.saddle_path = saddle;
    fam.b = b;

    for (double t : {-1.0, 1.0})
        for (double x0 : {-0.7, 0.0, 0.3})
            for (double x1 : {-0.5, 0.2})
                if ((psi(t, {x0, x1}) - phi_d * Eigen::Vector2d(x0, x1)).norm() > 1e-12)
                    throw Error(ErrorCode::MismatchedEndpoints, "psi_{+-1} differs from phi");

    double K = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double t = -1.0 + 2.0 * i / 200.0;
        for (int p = 0; p <= 20; ++p)
            for (int q = 0; q <= 20; ++q) {
                const Eigen::Vector2d x(-1.0 + 0.1 * p, -1.0 + 0.1 * q);
                if (x.norm() > 1.0) continue;
                K = std::max(K, norm2(psi_d(t, x)));
            }
    }
    fam.K = K;
    const double win_min = std::min(beta.derivative(eps), beta.derivative(0.0));
    if (saddle && std::min(win_min, beta.min_derivative()) <= K && win_min <= K)
        fam.warnings.push_back("base derivative does not exceed K on the saddle window");

    const double bsup = b.sup_norm();
    double reach = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double t = -1.0 + 2.0 * i / 200.0;
        for (int j = 0; j < 256; ++j) {
            const double ang = kTwoPi * j / 256.0;
            reach = std::max(reach, psi(t, {std::cos(ang), std::sin(ang)}).norm());
        }
    }
    if (reach + bsup >= 1.0) throw Error(ErrorCode::DomainEscape, "fiber image leaves the unit disk");

    SkewProduct sp;
    sp.beta = beta;
    sp.fiber = [=](double th, const Eigen::Vector2d& x) -> Eigen::Vector2d {
        const double tw = wrap_half(th);
        const Eigen::Vector2d base = std::abs(tw) < eps ? psi(tw / eps, x) : Eigen::Vector2d(phi_d * x);
        return base + b.eval(th);
    };
    sp.fiber_dx = [=](double th, const Eigen::Vector2d& x) -> Eigen::Matrix2d {
        const double tw = wrap_half(th);
        return std::abs(tw) < eps ? psi_d(tw / eps, x) : phi_d;
    };
    sp.fiber_dtheta = [=](double th, const Eigen::Vector2d& x) -> Eigen::Vector2d {
        const double tw = wrap_half(th);
        Eigen::Vector2d d = b.derivative(th);
        if (std::abs(tw) < eps) d += weight_d(tw / eps) / eps * (psi0(x) - phi_d * x);
        return d;
    };
    sp.disks = {Disk{Eigen::Vector2d::Zero(), 1.0}};
    sp.ref_a = 0.5;
    sp.ref_b = TrigPoly2::circle(0.3);

    SystemModel m = skew_model("modified_solenoid", sp, 400.0);
    m.params = {{"k", spec.k},
                {"a", a},
                {"alpha", spec.alpha},
                {"eps", eps},
                {"beta_c", spec.beta_c},
                {"K", K},
                {"saddle_unstable", ku},
                {"saddle_stable", ks}};
    m.warnings = fam.warnings;
    return {m, fam};
}

SystemModel make_two_solenoid(const TwoSolenoidSpec& spec) {
    if (spec.k < 3) throw Error(ErrorCode::InvalidParameter, "degree must be >= 3");
    if (spec.radius >= spec.separation) throw Error(ErrorCode::InvalidParameter, "disks overlap");
    const TrigPoly2 b = TrigPoly2::circle(0.3);
    const double a = spec.a, bs = spec.b_scale;
    if (a * spec.radius + bs * b.sup_norm() >= spec.radius)
        throw Error(ErrorCode::DomainEscape, "fiber image leaves the sub-disk");
    const Eigen::Vector2d cl(-spec.separation, 0.0), cr(spec.separation, 0.0);
    const bool swap = spec.swap;
    SkewProduct sp;
    sp.beta = BaseMap{spec.k, 0.0};
    sp.fiber = [=](double th, const Eigen::Vector2d& x) -> Eigen::Vector2d {
        const bool left = x[0] < 0.0;
        const Eigen::Vector2d& from = left ? cl : cr;
        const Eigen::Vector2d& to = (left != swap) ? cl : cr;
        return to + a * (x - from) + bs * b.eval(th);
    };
    sp.fiber_dx = [a](double, const Eigen::Vector2d&) -> Eigen::Matrix2d { return a * Eigen::Matrix2d::Identity(); };
    sp.fiber_dtheta = [=](double th, const Eigen::Vector2d&) -> Eigen::Vector2d { return bs * b.derivative(th); };
    sp.disks = {Disk{cl, spec.radius}, Disk{cr, spec.radius}};
    sp.ref_a = a;
    sp.ref_b = TrigPoly2::circle(0.3);
    SystemModel m = skew_model(swap ? "swap_solenoid" : "two_solenoid", sp, 1.0);
    m.params = {{"k", spec.k}, {"a", a}, {"separation", spec.separation}, {"radius", spec.radius}, {"b_scale", bs}};
    return m;
}

SystemModel make_linear_torus(const ToralAutomorphism& a) {
    SystemModel m;
    m.family = "cat_map";
    const int d = a.dim();
    m.state_dim = d;
    m.uu_dim = a.unstable_dim();
    m.cs_dim = d - m.uu_dim;
    m.domain = DomainKind::Torus;
    m.periodic.assign(d, true);
    m.cone_aperture = 1.0;
    m.frame = a.eigen_frame();
    m.min_expansion = a.unstable_rates.minCoeff();
    m.linear = a;
    const Mat A = a.real_matrix();
    const Mat Ainv = A.inverse();
    m.map = [A](const Vec& x) {
        Vec y = A * x;
        for (int i = 0; i < y.size(); ++i) y[i] = wrap01(y[i]);
        return y;
    };
    m.inverse_on_image = [Ainv](const Vec& y) -> std::optional<Vec> {
        Vec x = Ainv * y;
        for (int i = 0; i < x.size(); ++i) x[i] = wrap01(x[i]);
        return x;
    };
    m.derivative = [A](const Vec&) { return A; };
    m.base_projection = [](const Vec& x) { return x; };
    m.params = {{"lambda_u", a.unstable_rates[0]}};
    return m;
}

IMat default_da_matrix() {
    IMat m(3, 3);
    m << 3, 1, 2, 1, 1, 1, 2, 1, 2;
    return m;
}

SystemModel make_derived_anosov(const DerivedAnosovSpec& spec) {
    const ToralAutomorphism a = hyperbolic_split(spec.matrix);
    if (a.dim() != 3 || a.unstable_dim() != 1 || a.stable_basis.cols() != 2)
        throw Error(ErrorCode::InvalidParameter, "need eigenvalues 0 < k1 < k2 < 1 < k3");
    for (int i = 0; i < 2; ++i)
        if (!(a.stable_eigenvalues[i] > 0)) throw Error(ErrorCode::InvalidParameter, "stable eigenvalues must be positive");
    if (!(a.unstable_eigenvalues[0] > 0)) throw Error(ErrorCode::InvalidParameter, "unstable eigenvalue must be positive");
    if (spec.direction < 0 || spec.direction > 1) throw Error(ErrorCode::InvalidParameter, "direction must be 0 or 1");

    SystemModel m = make_linear_torus(a);
    m.family = "derived_anosov";
    const Mat A = a.real_matrix();
    const Eigen::Vector3d e = a.stable_basis.col(spec.direction);
    const Eigen::Vector3d w = spec.wave;
    const double amp = spec.amplitude;
    auto lifted = [A, e, w, amp](const Vec& x) -> Vec {
        return A * x + amp * std::sin(kTwoPi * w.dot(Eigen::Vector3d(x))) * Vec(e);
    };
    auto jac = [A, e, w, amp](const Vec& x) -> Mat {
        return A + amp * kTwoPi * std::cos(kTwoPi * w.dot(Eigen::Vector3d(x))) * (Vec(e) * Vec(w).transpose());
    };
    m.map = [lifted](const Vec& x) {
        Vec y = lifted(x);
        for (int i = 0; i < y.size(); ++i) y[i] = wrap01(y[i]);
        return y;
    };
    m.derivative = jac;
    const Mat Ainv = A.inverse();
    m.inverse_on_image = [lifted, jac, Ainv](const Vec& y) -> std::optional<Vec> {
        Vec z = Ainv * y;
        for (int it = 0; it < 40; ++it) {
            Vec r = lifted(z) - y;
            for (int i = 0; i < r.size(); ++i) r[i] = wrap_half(r[i]);
            if (r.norm() < 1e-15) break;
            z -= jac(z).lu().solve(r);
            if (!z.allFinite()) return std::nullopt;
        }
        Vec r = lifted(z) - y;
        for (int i = 0; i < r.size(); ++i) r[i] = wrap_half(r[i]);
        if (r.norm() > 1e-12) return std::nullopt;
        for (int i = 0; i < z.size(); ++i) z[i] = wrap01(z[i]);
        return z;
    };
    m.params = {{"amplitude", amp},
                {"kappa1", a.stable_rates[0]},
                {"kappa2", a.stable_rates[1]},
                {"kappa3", a.unstable_rates[0]},
                {"direction", spec.direction}};
    if (spec.verify) {
        const ConeReport rep = verify_partial_hyperbolicity(m, 2000, 99);
        if (!rep.pass) {
            std::string msg = "cone ratio " + std::to_string(rep.max_cone_ratio) + " at x = (";
            for (int i = 0; i < rep.witness_point.size(); ++i)
                msg += (i ? ", " : "") + std::to_string(rep.witness_point[i]);
            msg += ")";
            throw Error(ErrorCode::ConeCheckFailed, msg);
        }
    }
    return m;
}

ConeReport verify_partial_hyperbolicity(const SystemModel& model, std::size_t samples, std::uint64_t seed) {
    ConeReport rep;
    rep.min_expansion = std::numeric_limits<double>::infinity();
    rep.min_partial_volume = std::numeric_limits<double>::infinity();
    const int u = model.uu_dim, c = model.cs_dim;
    const Mat finv = model.frame.inverse();
    const double gamma = model.cone_aperture;

    struct Slot {
        double min_exp, max_ratio, max_dom, min_pv;
        Vec x, v;
    };
    std::vector<Slot> slots(samples);
    parallel_for(samples, [&](std::size_t i) {
        Rng rng(mix_seed(seed, i));
        const Vec x = model.random_attractor_point(rng, 20);
        const Mat df = model.derivative(x);
        const Mat mf = finv * df * model.frame;
        Slot s{std::numeric_limits<double>::infinity(), 0.0, 0.0, std::numeric_limits<double>::infinity(), x, Vec()};
        for (int j = 0; j < 6; ++j) {
            Vec v(model.state_dim);
            for (int k = 0; k < u; ++k) v[k] = rng.normal();
            v.head(u).normalize();
            Vec w(c);
            for (int k = 0; k < c; ++k) w[k] = rng.normal();
            w.normalize();
            const double r = j < 4 ? 1.0 : rng.uniform();
            v.tail(c) = gamma * r * w;
            const Vec img = mf * v;
            const double grow = img.head(u).norm();
            const double ratio = img.tail(c).norm() / (gamma * grow);
            s.min_exp = std::min(s.min_exp, grow);
            if (ratio > s.max_ratio) {
                s.max_ratio = ratio;
                s.v = model.frame * v;
            }
        }
        const double cs_norm = Eigen::JacobiSVD<Mat>(mf.bottomRightCorner(c, c)).singularValues()[0];
        s.max_dom = cs_norm / s.min_exp;
        if (u == 1) {
            const Vec e = model.frame.col(0);
            const Vec de = df * e;
            for (int j = 0; j < 16; ++j) {
                Vec wc = Vec::Zero(c);
                wc[0] = std::cos(kTwoPi * j / 32.0);
                if (c > 1) wc[1] = std::sin(kTwoPi * j / 32.0);
                Vec wv = model.frame.rightCols(c) * wc;
                wv.normalize();
                const Vec dw = df * wv;
                auto area = [](const Vec& p, const Vec& q) {
                    return std::sqrt(std::max(0.0, p.squaredNorm() * q.squaredNorm() - p.dot(q) * p.dot(q)));
                };
                s.min_pv = std::min(s.min_pv, area(de, dw) / area(e, wv));
            }
        }
        slots[i] = s;
    });
    for (const auto& s : slots) {
        rep.min_expansion = std::min(rep.min_expansion, s.min_exp);
        rep.max_domination_ratio = std::max(rep.max_domination_ratio, s.max_dom);
        rep.min_partial_volume = std::min(rep.min_partial_volume, s.min_pv);
        if (s.max_ratio >= rep.max_cone_ratio) {
            rep.max_cone_ratio = s.max_ratio;
            rep.witness_point = s.x;
            rep.witness_vector = s.v;
        }
    }
    rep.samples = samples;
    rep.max_omega = 1.0 / rep.min_expansion;
    if (u != 1) rep.min_partial_volume = std::numeric_limits<double>::quiet_NaN();
    rep.pass = rep.max_cone_ratio < 1.0 && rep.max_omega < 1.0 && rep.max_domination_ratio < 1.0;
    return rep;
}

double derivative_fd_error(const SystemModel& model, std::size_t samples, std::uint64_t seed) {
    std::vector<double> err(samples, 0.0);
    parallel_for(samples, [&](std::size_t i) {
        Rng rng(mix_seed(seed, i));
        const Vec x = model.random_attractor_point(rng, 20);
        const Mat df = model.derivative(x);
        const double h = 1e-6;
        for (int j = 0; j < model.state_dim; ++j) {
            Vec xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const Vec col = model.displacement(model.map(xm), model.map(xp)) / (2 * h);
            err[i] = std::max(err[i], (col - df.col(j)).cwiseAbs().maxCoeff() / std::max(1.0, df.col(j).cwiseAbs().maxCoeff()));
        }
    });
    return *std::max_element(err.begin(), err.end());
}

double inverse_residual(const SystemModel& model, std::size_t samples, std::uint64_t seed) {
    double worst = 0.0;
    Rng rng(seed);
    for (std::size_t i = 0; i < samples; ++i) {
        const Vec y = model.random_attractor_point(rng, 30);
        const auto x = model.inverse_on_image(y);
        if (!x) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, model.distance(model.map(*x), y));
    }
    return worst;
}

}  // namespace ugibbs
