#include "ugibbs/leaves.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace ugibbs {

namespace {

// Window of four nodes around x in ascending xs.
std::size_t window_start(const std::vector<double>& xs, double x) {
    const std::size_t n = xs.size();
    if (n <= 4) return 0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    return std::min(n - 4, i < 2 ? 0 : i - 2);
}

template <typename Value>
Value lagrange(const std::vector<double>& xs, const std::vector<Value>& ys, double x) {
    const std::size_t j0 = window_start(xs, x);
    const std::size_t m = std::min<std::size_t>(4, xs.size());
    Value out = ys[j0] * 0.0;
    for (std::size_t a = j0; a < j0 + m; ++a) {
        double w = 1.0;
        for (std::size_t b = j0; b < j0 + m; ++b)
            if (b != a) w *= (x - xs[b]) / (xs[a] - xs[b]);
        out = out + ys[a] * w;
    }
    return out;
}

constexpr int kForwardSteps = 12;  // forward iterates for t on perturbed tori
constexpr int kSkewDepth = 60;

bool linear_factor(const FactorChart& chart) {
    return !chart.pi || chart.pi->kind == SemiConjugacy::Kind::Identity;
}

void insert_anchor(UnstablePlaque& pl) {
    if (pl.sigma.empty() || pl.sigma.front() > 0.0 || pl.sigma.back() < 0.0) return;
    const auto it = std::lower_bound(pl.sigma.begin(), pl.sigma.end(), 0.0);
    const std::size_t i = static_cast<std::size_t>(it - pl.sigma.begin());
    if (i < pl.sigma.size() && std::abs(pl.sigma[i]) < 1e-14) return;
    if (i > 0 && std::abs(pl.sigma[i - 1]) < 1e-14) return;
    pl.sigma.insert(pl.sigma.begin() + static_cast<std::ptrdiff_t>(i), 0.0);
    pl.t.insert(pl.t.begin() + static_cast<std::ptrdiff_t>(i), 0.0);
    pl.points.insert(pl.points.begin() + static_cast<std::ptrdiff_t>(i), pl.anchor);
}

void fill_samples(const FactorChart& chart, UnstablePlaque& pl, const std::vector<Vec>& pts) {
    pl.points = pts;
    pl.sigma.resize(pts.size());
    pl.t.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pl.sigma[i] = leaf_sigma(chart, pl.anchor, pts[i]);
        pl.t[i] = leaf_dt(chart, pl.anchor, pts[i]);
    }
    insert_anchor(pl);
}

// delta with beta(theta + delta) - beta(theta) = dprev (same inverse branch).
double branch_delta(const BaseMap& beta, double theta, double dprev) {
    if (dprev == 0.0) return 0.0;
    double lo = dprev / beta.max_derivative(), hi = dprev / beta.min_derivative();
    if (lo > hi) std::swap(lo, hi);
    const double base = beta.lift(theta);
    double d = std::clamp(dprev / beta.derivative(theta), lo, hi);
    for (int it = 0; it < 60; ++it) {
        const double f = beta.lift(theta + d) - base - dprev;
        if (std::abs(f) < 1e-16) break;
        (f > 0 ? hi : lo) = d;
        double next = d - f / beta.derivative(theta + d);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == d) break;
        d = next;
    }
    return d;
}

double solve_monotone(const std::function<double(double)>& f, double target, double guess) {
    if (target == 0.0) return 0.0;
    double lo = 0.0, hi = guess;
    if (target > 0) {
        while (f(hi) < target) lo = hi, hi *= 2.0;
    } else {
        while (f(hi) > target) lo = hi, hi *= 2.0;
    }
    if (lo > hi) std::swap(lo, hi);
    for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (f(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

Vec UnstablePlaque::at_sigma(double s) const { return lagrange(sigma, points, s); }

double UnstablePlaque::sigma_at_t(double tt) const { return lagrange(t, sigma, tt); }

Vec lifted_map(const SystemModel& model, const Vec& p) {
    if (model.skew) {
        const SkewProduct& sp = *model.skew;
        Vec out(3);
        const Eigen::Vector2d y = sp.fiber(wrap01(p[0]), Eigen::Vector2d(p[1], p[2]));
        out << sp.beta.lift(p[0]), y[0], y[1];
        return out;
    }
    const Mat A = model.linear->real_matrix();
    const Vec w = model.wrap(p);
    Vec g = model.map(w) - A * w;
    for (int i = 0; i < g.size(); ++i) g[i] = wrap_half(g[i]);
    return A * p + g;
}

Vec base_image(const FactorChart& chart, const Vec& b) {
    if (chart.cells->kind() == MarkovStructure::Kind::Circle) {
        Vec out(1);
        out << wrap01(chart.cells->degree() * b[0]);
        return out;
    }
    return chart.cells->automorphism()->apply(b);
}

Vec base_at(const FactorChart& chart, const UnstablePlaque& pl, double t) {
    return chart.cells->wrap(pl.base_anchor + chart.cells->unstable_step(t));
}

double leaf_sigma(const FactorChart& chart, const Vec& x, const Vec& p) {
    if (chart.model->skew) return p[0] - x[0];
    return chart.cells->unstable_coordinate(p - x);
}

double leaf_dt(const FactorChart& chart, const Vec& x, const Vec& y) {
    if (chart.model->skew) {
        if (!chart.conj || chart.conj->identity()) return y[0] - x[0];
        return chart.conj->lift(y[0]) - chart.conj->lift(x[0]);
    }
    if (linear_factor(chart)) return chart.cells->unstable_coordinate(y - x);
    Vec a = x, b = y;
    for (int i = 0; i < kForwardSteps; ++i) {
        a = lifted_map(*chart.model, a);
        b = lifted_map(*chart.model, b);
    }
    return chart.cells->unstable_coordinate(b - a) / std::pow(chart.expansion, kForwardSteps);
}

Vec leaf_point_at_t(const FactorChart& chart, const UnstablePlaque& pl, double t) {
    if (chart.model->skew && chart.conj && !chart.conj->identity()) {
        const double guess = pl.anchor[0] + pl.sigma_at_t(t);
        const double th = chart.conj->inverse(pl.base_anchor[0] + t);
        const double lifted = guess + wrap_half(th - guess);
        Vec p = pl.at_sigma(lifted - pl.anchor[0]);
        p[0] = lifted;
        return p;
    }
    if (chart.model->skew) {
        Vec p = pl.at_sigma(t);
        p[0] = pl.anchor[0] + t;
        return p;
    }
    return pl.at_sigma(pl.sigma_at_t(t));
}

UnstablePlaque grow_unstable_leaf_from(const FactorChart& chart, const Vec& x, const std::vector<Vec>& past,
                                       double t_minus, double t_plus, int resolution) {
    if (resolution < 3) throw Error(ErrorCode::InsufficientResolution, "need at least 3 samples");
    if (!(t_plus > t_minus)) throw Error(ErrorCode::InvalidParameter, "empty leaf range");
    const SystemModel& m = *chart.model;
    UnstablePlaque pl;
    pl.anchor = m.wrap(x);
    pl.base_anchor = chart.base_point(pl.anchor);
    pl.cell_id = chart.cells->locate(pl.base_anchor);
    pl.t_lo = t_minus;
    pl.t_hi = t_plus;
    std::vector<Vec> pts(static_cast<std::size_t>(resolution));

    if (m.skew) {
        pl.parameter_kind = ParameterKind::BaseCoordinate;
        const SkewProduct& sp = *m.skew;
        const double th0 = pl.anchor[0];
        const int n = std::min<int>(kSkewDepth, static_cast<int>(past.size()));
        auto point_at = [&](double theta) {
            std::vector<double> delta(n + 1);
            delta[0] = theta - th0;
            for (int j = 1; j <= n; ++j) delta[j] = branch_delta(sp.beta, past[j - 1][0], delta[j - 1]);
            Eigen::Vector2d y = n > 0 ? Eigen::Vector2d(past[n - 1][1], past[n - 1][2])
                                      : Eigen::Vector2d(pl.anchor[1], pl.anchor[2]);
            for (int j = n; j >= 1; --j) y = sp.fiber(wrap01(past[j - 1][0] + delta[j]), y);
            Vec p(3);
            p << theta, y[0], y[1];
            return p;
        };
        auto theta_for = [&](double t) {
            if (t == 0.0) return th0;
            if (!chart.conj || chart.conj->identity()) return th0 + t;
            const double guess = th0 + t;
            return guess + wrap_half(chart.conj->inverse(pl.base_anchor[0] + t) - guess);
        };
        const double s0 = theta_for(t_minus), s1 = theta_for(t_plus);
        for (int i = 0; i < resolution; ++i) pts[i] = point_at(s0 + (s1 - s0) * i / (resolution - 1));
    } else {
        pl.parameter_kind = ParameterKind::AUnstableCoordinate;
        const int n = std::min<int>(static_cast<int>(past.size()),
                                    linear_factor(chart) ? 0
                                                         : static_cast<int>(std::ceil(
                                                               std::log(std::max(t_plus - t_minus, 1e-3) / 1e-5) /
                                                               std::log(chart.expansion))));
        const Vec start = n > 0 ? m.wrap(past[n - 1]) : pl.anchor;
        const Vec e = chart.cells->unstable_direction();
        Vec end0 = start;
        for (int j = 0; j < n; ++j) end0 = lifted_map(m, end0);
        auto point_at = [&](double s) {
            Vec y = start + s * e;
            for (int j = 0; j < n; ++j) y = lifted_map(m, y);
            return Vec(pl.anchor + (y - end0));
        };
        auto t_of = [&](double s) { return leaf_dt(chart, pl.anchor, point_at(s)); };
        const double scale = std::pow(chart.expansion, -n);
        const double s0 = solve_monotone(t_of, t_minus, t_minus * scale);
        const double s1 = solve_monotone(t_of, t_plus, t_plus * scale);
        for (int i = 0; i < resolution; ++i) pts[i] = point_at(s0 + (s1 - s0) * i / (resolution - 1));
    }
    fill_samples(chart, pl, pts);
    check_plaque_cone(m, pl);
    return pl;
}

UnstablePlaque grow_unstable_leaf(const FactorChart& chart, const Vec& x, double t_minus, double t_plus,
                                  int resolution) {
    const SystemModel& m = *chart.model;
    int depth = kSkewDepth;
    if (!m.skew) {
        depth = linear_factor(chart) ? 0
                                     : static_cast<int>(std::ceil(std::log(std::max(t_plus - t_minus, 1e-3) / 1e-5) /
                                                                  std::log(chart.expansion)));
    }
    std::vector<Vec> past;
    Vec z = m.wrap(x);
    for (int j = 0; j < depth; ++j) {
        auto p = m.inverse_on_image(z);
        if (!p) throw Error(ErrorCode::NotOnAttractor, "no backward orbit for leaf growth");
        z = *p;
        past.push_back(z);
    }
    return grow_unstable_leaf_from(chart, x, past, t_minus, t_plus, resolution);
}

UnstablePlaque plaque_of(const FactorChart& chart, const Vec& x, int resolution) {
    const PlaqueSpan sp = chart.span(chart.model->wrap(x));
    UnstablePlaque pl = grow_unstable_leaf(chart, x, -sp.below, sp.above, resolution);
    pl.cell_id = sp.cell;
    return pl;
}

UnstablePlaque plaque_of_from(const FactorChart& chart, const Vec& x, const std::vector<Vec>& past, int resolution) {
    const PlaqueSpan sp = chart.span(chart.model->wrap(x));
    UnstablePlaque pl = grow_unstable_leaf_from(chart, x, past, -sp.below, sp.above, resolution);
    pl.cell_id = sp.cell;
    return pl;
}

double check_plaque_cone(const SystemModel& model, const UnstablePlaque& pl) {
    const Mat finv = model.frame.inverse();
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < pl.points.size(); ++i) {
        const Vec c = finv * (pl.points[i + 1] - pl.points[i]);
        const double u = c.head(model.uu_dim).norm();
        const double cs = c.tail(model.cs_dim).norm();
        if (u == 0.0 && cs == 0.0) continue;
        const double r = u > 0 ? cs / u : std::numeric_limits<double>::infinity();
        if (r > model.cone_aperture)
            throw Error(ErrorCode::ConeCheckFailed, "chord " + std::to_string(i) + " leaves the unstable cone");
        worst = std::max(worst, r);
    }
    return worst;
}

double cs_holonomy_t(const FactorChart& chart, const UnstablePlaque& from, const UnstablePlaque& to, double t_from) {
    const auto off = chart.cells->bracket_offset(to.base_anchor, base_at(chart, from, t_from));
    if (!off) throw Error(ErrorCode::BracketOutOfCell, "bracket leaves the cell");
    return *off;
}

Vec cs_holonomy(const FactorChart& chart, const UnstablePlaque& from, const UnstablePlaque& to, double t_from) {
    return chart.model->wrap(leaf_point_at_t(chart, to, cs_holonomy_t(chart, from, to, t_from)));
}

std::vector<ImagePiece> split_line(const FactorChart& chart, const Vec& base, double lo, double hi) {
    std::vector<ImagePiece> pieces;
    const MarkovStructure& cells = *chart.cells;
    if (!(hi > lo)) {
        pieces.push_back({cells.locate(base), lo, hi, 1.0});
        return pieces;
    }
    const double total = hi - lo;
    const double eta = 1e-10;
    double tau = lo;
    while (hi - tau > 1e-12) {
        const PlaqueSpan sp = cells.unstable_span(cells.wrap(base + cells.unstable_step(tau + eta)));
        double end = std::min(hi, tau + eta + sp.above);
        if (end <= tau) end = std::min(hi, tau + 2 * eta);
        if (end - tau > 1e-9) pieces.push_back({sp.cell, tau, end, (end - tau) / total});
        tau = end;
    }
    return pieces;
}

PlaqueImage push_plaque(const FactorChart& chart, const UnstablePlaque& pl) {
    const SystemModel& m = *chart.model;
    const double lambda = chart.expansion;
    PlaqueImage out;
    UnstablePlaque& im = out.image;
    const Vec fa = lifted_map(m, pl.anchor);
    im.anchor = m.wrap(fa);
    const Vec shift = im.anchor - fa;
    im.base_anchor = base_image(chart, pl.base_anchor);
    im.t_lo = lambda * pl.t_lo;
    im.t_hi = lambda * pl.t_hi;
    im.parameter_kind = pl.parameter_kind;
    im.points.resize(pl.size());
    im.sigma.resize(pl.size());
    im.t.resize(pl.size());
    for (std::size_t i = 0; i < pl.size(); ++i) {
        im.points[i] = lifted_map(m, pl.points[i]) + shift;
        im.sigma[i] = leaf_sigma(chart, im.anchor, im.points[i]);
        im.t[i] = lambda * pl.t[i];
    }

    out.pieces = split_line(chart, im.base_anchor, im.t_lo, im.t_hi);
    return out;
}

UnstablePlaque restrict_plaque(const FactorChart& chart, const UnstablePlaque& src, int cell, double a, double b,
                               double anchor_t, int resolution) {
    if (resolution < 3) throw Error(ErrorCode::InsufficientResolution, "need at least 3 samples");
    const SystemModel& m = *chart.model;
    UnstablePlaque out;
    const Vec pc = leaf_point_at_t(chart, src, anchor_t);
    out.anchor = m.wrap(pc);
    const Vec shift = out.anchor - pc;
    // recomputed rather than propagated: factor errors along u grow by the expansion each step
    out.base_anchor = chart.base_point ? chart.base_point(out.anchor) : base_at(chart, src, anchor_t);
    out.cell_id = cell;
    out.t_lo = a - anchor_t;
    out.t_hi = b - anchor_t;
    out.parameter_kind = src.parameter_kind;
    const Vec pa = leaf_point_at_t(chart, src, a), pb = leaf_point_at_t(chart, src, b);
    const double sa = leaf_sigma(chart, src.anchor, pa), sb = leaf_sigma(chart, src.anchor, pb);
    std::vector<Vec> pts(static_cast<std::size_t>(resolution));
    pts.front() = pa + shift;
    pts.back() = pb + shift;
    for (int i = 1; i + 1 < resolution; ++i) pts[i] = src.at_sigma(sa + (sb - sa) * i / (resolution - 1)) + shift;
    fill_samples(chart, out, pts);
    return out;
}

void write_plaque_csv(const FactorChart& chart, const UnstablePlaque& pl, const std::string& path) {
    std::ofstream os(path);
    os << std::setprecision(17);
    const int d = static_cast<int>(pl.anchor.size());
    const int bd = static_cast<int>(pl.base_anchor.size());
    os << "t";
    for (int i = 0; i < d; ++i) os << ",x" << i;
    for (int i = 0; i < bd; ++i) os << ",pi" << i;
    os << "\n";
    for (std::size_t k = 0; k < pl.size(); ++k) {
        const Vec p = chart.model->wrap(pl.points[k]);
        const Vec b = base_at(chart, pl, pl.t[k]);
        os << pl.t[k];
        for (int i = 0; i < d; ++i) os << "," << p[i];
        for (int i = 0; i < bd; ++i) os << "," << b[i];
        os << "\n";
    }
}

}  // namespace ugibbs
