#include "ugibbs/factor.hpp"

#include <algorithm>
#include <fstream>

namespace ugibbs {

CircleConjugacy::CircleConjugacy(const BaseMap& beta, int depth) : beta_(beta), depth_(depth) {
    cuts_.assign(beta.degree + 1, 0.0);
    cuts_.back() = 1.0;
    for (int j = 1; j < beta.degree; ++j) {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            (beta.lift(mid) < j ? lo : hi) = mid;
        }
        cuts_[j] = 0.5 * (lo + hi);
    }
}

double CircleConjugacy::operator()(double theta) const {
    double x = wrap01(theta);
    if (identity()) return x;
    const int k = beta_.degree;
    double u = 0.0, scale = 1.0 / k;
    for (int n = 0; n < depth_; ++n) {
        const double y = beta_.lift(x);
        const double d = std::clamp(std::floor(y), 0.0, static_cast<double>(k - 1));
        u += d * scale;
        x = std::clamp(y - d, 0.0, 1.0);
        scale /= k;
    }
    return wrap01(u + x * scale * k);
}

double CircleConjugacy::lift(double x) const {
    const double f = std::floor(x);
    return f + (*this)(x - f);
}

double CircleConjugacy::branch(int d, double y) const {
    // theta in the d-th branch interval with lift(theta) = y + d
    double lo = cuts_[d], hi = cuts_[d + 1];
    const double target = y + d;
    double th = lo + y * (hi - lo);
    for (int it = 0; it < 60; ++it) {
        const double f = beta_.lift(th) - target;
        if (f > 0) hi = th; else lo = th;
        if (std::abs(f) < 1e-16 || hi - lo < 1e-16) break;
        double next = th - f / beta_.derivative(th);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        th = next;
    }
    return th;
}

double CircleConjugacy::inverse(double u) const {
    double r = wrap01(u);
    if (identity()) return r;
    const int k = beta_.degree;
    std::vector<int> digits(depth_);
    for (int n = 0; n < depth_; ++n) {
        const double y = k * r;
        const int d = std::clamp(static_cast<int>(std::floor(y)), 0, k - 1);
        digits[n] = d;
        r = std::clamp(y - d, 0.0, 1.0);
    }
    double th = r;
    for (int n = depth_ - 1; n >= 0; --n) th = branch(digits[n], th);
    return wrap01(th);
}

int CircleConjugacy::arc(double theta) const {
    const double x = wrap01(theta);
    const auto it = std::upper_bound(cuts_.begin(), cuts_.end(), x);
    return std::clamp(static_cast<int>(it - cuts_.begin()) - 1, 0, beta_.degree - 1);
}

double CircleConjugacy::residual(std::size_t samples) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double th = (i + 0.5) / samples;
        worst = std::max(worst, std::abs(wrap_half((*this)(beta_(th)) - beta_.degree * (*this)(th))));
    }
    return worst;
}

CircleConjugacy circle_conjugacy(const BaseMap& beta, int depth) {
    if (beta.min_derivative() <= 1.0) throw Error(ErrorCode::NotExpanding, "min beta' <= 1");
    return CircleConjugacy(beta, depth);
}

const char* kind_name(SemiConjugacy::Kind k) {
    switch (k) {
        case SemiConjugacy::Kind::Identity: return "identity";
        case SemiConjugacy::Kind::SkewItinerary: return "skew_itinerary";
        case SemiConjugacy::Kind::FranksSeries: return "franks_series";
        case SemiConjugacy::Kind::CircleConjugacy: return "circle_conjugacy";
    }
    return "unknown";
}

void SemiConjugacy::sample_grid(int n, int state_dim, const std::function<Vec(const Vec&, const Vec&)>& disp) {
    grid_n = n;
    std::size_t total = 1;
    for (int i = 0; i < state_dim; ++i) total *= n;
    grid.resize(state_dim, static_cast<Eigen::Index>(total));
    parallel_for(total, [&](std::size_t idx) {
        Vec x(state_dim);
        std::size_t rem = idx;
        for (int i = 0; i < state_dim; ++i) {
            x[i] = static_cast<double>(rem % n) / n;
            rem /= n;
        }
        grid.col(static_cast<Eigen::Index>(idx)) = disp(x, evaluate(x));
    });
}

void SemiConjugacy::save(const std::string& stem) const {
    std::ofstream bin(stem + ".bin", std::ios::binary);
    bin.write(reinterpret_cast<const char*>(grid.data()), static_cast<std::streamsize>(grid.size() * sizeof(double)));
    nlohmann::json side;
    side["kind"] = kind_name(kind);
    side["tolerance"] = tolerance;
    side["depth"] = depth;
    side["grid_n"] = grid_n;
    side["components"] = grid.rows();
    side["layout"] = "column-major, component fastest, first coordinate next";
    side["dtype"] = "float64-le";
    side["displacement_sup"] = displacement_sup;
    std::ofstream(stem + ".json") << side.dump(2) << "\n";
}

SemiConjugacy franks_semiconjugacy(const SystemModel& model, double tol) {
    if (!model.linear || model.domain != DomainKind::Torus)
        throw Error(ErrorCode::InvalidParameter, "Franks semiconjugacy needs a torus map with a linear part");
    const ToralAutomorphism& a = *model.linear;
    const double r = std::max(a.stable_rates.maxCoeff(), 1.0 / a.unstable_rates.minCoeff());
    if (!(r < 1.0)) throw Error(ErrorCode::NoConvergence, "contraction rate estimate >= 1");
    SemiConjugacy pi;
    pi.tolerance = tol;
    const double amp = model.params.count("amplitude") ? model.params.at("amplitude") : 0.0;
    if (amp == 0.0) {
        pi.kind = SemiConjugacy::Kind::Identity;
        pi.evaluate = [](const Vec& x) { return x; };
        return pi;
    }
    pi.kind = SemiConjugacy::Kind::FranksSeries;
    pi.depth = static_cast<int>(std::ceil(std::log(tol * (1.0 - r)) / std::log(r)));
    const int depth = pi.depth;
    const Mat A = a.real_matrix();
    const Mat Ainv = A.inverse();
    const Mat E = a.eigen_frame();
    const Mat Einv = E.inverse();
    const int du = a.unstable_dim();
    const Mat Pu = E.leftCols(du) * Einv.topRows(du);
    const Mat Ps = Mat::Identity(a.dim(), a.dim()) - Pu;
    auto map = model.map;
    auto inv = model.inverse_on_image;
    auto g = [A, map](const Vec& z) {
        Vec d = map(z) - A * z;
        for (int i = 0; i < d.size(); ++i) d[i] = wrap_half(d[i]);
        return d;
    };
    auto displacement = [=](const Vec& x) -> Vec {
        std::vector<Vec> fwd(depth), bwd(depth);
        Vec z = x;
        for (int n = 0; n < depth; ++n) {
            fwd[n] = z;
            z = map(z);
        }
        z = x;
        for (int n = 0; n < depth; ++n) {
            auto p = inv(z);
            if (!p) throw Error(ErrorCode::NoConvergence, "backward orbit failed");
            z = *p;
            bwd[n] = z;
        }
        // Reprojecting each step keeps roundoff in the complementary directions from growing.
        Vec su = Vec::Zero(x.size()), ss = Vec::Zero(x.size());
        for (int n = depth - 1; n >= 0; --n) su = Pu * (Ainv * (su + g(fwd[n])));
        for (int n = depth - 1; n >= 0; --n) ss = Ps * (A * ss + g(bwd[n]));
        return Vec(su - ss);
    };
    pi.evaluate = [displacement](const Vec& x) {
        Vec y = x + displacement(x);
        for (int i = 0; i < y.size(); ++i) y[i] = wrap01(y[i]);
        return y;
    };
    double sup = 0.0;
    Rng rng(7);
    for (int i = 0; i < 200; ++i) sup = std::max(sup, displacement(model.random_point(rng)).cwiseAbs().maxCoeff());
    pi.displacement_sup = sup;
    const double res = franks_residual(model, pi, 200, 11);
    if (!(res < tol)) throw Error(ErrorCode::NoConvergence, "residual " + std::to_string(res) + " above tolerance");
    return pi;
}

double franks_residual(const SystemModel& model, const SemiConjugacy& pi, std::size_t samples, std::uint64_t seed) {
    const ToralAutomorphism& a = *model.linear;
    std::vector<double> res(samples, 0.0);
    parallel_for(samples, [&](std::size_t i) {
        Rng rng(mix_seed(seed, i));
        const Vec x = model.random_point(rng);
        const Vec lhs = pi.evaluate(model.map(x));
        const Vec rhs = a.apply(pi.evaluate(x));
        Vec d = lhs - rhs;
        for (int k = 0; k < d.size(); ++k) d[k] = wrap_half(d[k]);
        res[i] = d.cwiseAbs().maxCoeff();
    });
    return *std::max_element(res.begin(), res.end());
}

SemiConjugacy skew_semiconjugacy(const SystemModel& model, int depth) {
    if (!model.skew) throw Error(ErrorCode::InvalidParameter, "skew semiconjugacy needs a skew product");
    if (depth < 1) throw Error(ErrorCode::InvalidParameter, "depth must be positive");
    const SkewProduct& sp = *model.skew;
    auto conj = std::make_shared<CircleConjugacy>(circle_conjugacy(sp.beta));
    const double a0 = sp.ref_a;
    const TrigPoly2 b0 = sp.ref_b;
    SemiConjugacy pi;
    pi.kind = SemiConjugacy::Kind::SkewItinerary;
    pi.depth = depth;
    pi.tolerance = std::pow(a0, depth) * 2.0;
    pi.evaluate_with_history = [conj, a0, b0, depth](const Vec& x, const std::vector<Vec>& past) {
        Vec out(3);
        out[0] = (*conj)(x[0]);
        Eigen::Vector2d y(0.0, 0.0);
        double w = 1.0;
        const int n = std::min<int>(depth, static_cast<int>(past.size()));
        for (int j = 0; j < n; ++j) {
            y += w * b0.eval((*conj)(past[j][0]));
            w *= a0;
        }
        out[1] = y[0];
        out[2] = y[1];
        return out;
    };
    auto with_history = pi.evaluate_with_history;
    auto inv = model.inverse_on_image;
    pi.evaluate = [with_history, inv, depth](const Vec& x) {
        std::vector<Vec> past;
        past.reserve(depth);
        Vec z = x;
        for (int j = 0; j < depth; ++j) {
            auto p = inv(z);
            if (!p) throw Error(ErrorCode::NotOnAttractor, "backward orbit leaves the trapping region");
            z = *p;
            past.push_back(z);
        }
        return with_history(x, past);
    };
    return pi;
}

double skew_residual(const SystemModel& model, const SemiConjugacy& pi, std::size_t samples, std::uint64_t seed) {
    const SkewProduct& sp = *model.skew;
    const int k = sp.beta.degree;
    std::vector<double> res(samples, 0.0);
    parallel_for(samples, [&](std::size_t i) {
        Rng rng(mix_seed(seed, i));
        const int n = pi.depth + 2;
        std::vector<Vec> orbit{model.random_point(rng)};
        for (int j = 0; j < n; ++j) orbit.push_back(model.map(orbit.back()));
        std::vector<Vec> past(orbit.rbegin() + 2, orbit.rend());
        const Vec& x = orbit[n - 1];
        const Vec px = pi.evaluate_with_history(x, past);
        past.insert(past.begin(), x);
        const Vec pfx = pi.evaluate_with_history(orbit[n], past);
        Vec g0(3);
        const Eigen::Vector2d y = sp.ref_a * px.tail<2>() + sp.ref_b.eval(px[0]);
        g0 << wrap01(k * px[0]), y[0], y[1];
        Vec d = pfx - g0;
        d[0] = wrap_half(d[0]);
        res[i] = d.cwiseAbs().maxCoeff();
    });
    return *std::max_element(res.begin(), res.end());
}

int FactorChart::coarse_count() const {
    if (model->domain == DomainKind::SolidTorus)
        return cells->cell_count() * static_cast<int>(model->disks.size()) * fiber_bins;
    if (pi && pi->kind != SemiConjugacy::Kind::Identity) return static_cast<int>(std::pow(cells->per_axis(), model->state_dim));
    return cells->cell_count();
}

int FactorChart::coarse_symbol(const Vec& x) const {
    if (model->domain != DomainKind::SolidTorus) {
        if (!pi || pi->kind == SemiConjugacy::Kind::Identity) return cell(x);
        // perturbed tori: state-space boxes, which avoids evaluating pi per step
        const int m = cells->per_axis();
        int idx = 0;
        for (int i = x.size() - 1; i >= 0; --i)
            idx = idx * m + std::clamp(static_cast<int>(std::floor(wrap01(x[i]) * m)), 0, m - 1);
        return idx;
    }
    const int c = conj ? conj->arc(x[0]) : cell(x);
    const int nd = static_cast<int>(model->disks.size());
    const int d = std::max(0, model->disk_of(x));
    const Eigen::Vector2d rel = Eigen::Vector2d(x[1], x[2]) - model->disks[d].center;
    const int q = (rel[0] >= 0 ? 1 : 0) + (rel[1] >= 0 ? 2 : 0);
    return (c * nd + d) * fiber_bins + (fiber_bins == 4 ? q : 0);
}

FactorChart make_chart(const SystemModel& model, const ChartOptions& opt) {
    FactorChart ch;
    ch.model = std::make_shared<SystemModel>(model);
    if (model.skew) {
        const SkewProduct& sp = *model.skew;
        ch.cells = std::make_shared<MarkovStructure>(MarkovStructure::circle(sp.beta.degree));
        auto conj = std::make_shared<CircleConjugacy>(circle_conjugacy(sp.beta, opt.conj_depth));
        ch.conj = conj;
        ch.base_point = [conj](const Vec& x) {
            Vec b(1);
            b << (*conj)(x[0]);
            return b;
        };
        ch.expansion = sp.beta.degree;
        return ch;
    }
    if (!model.linear) throw Error(ErrorCode::InvalidParameter, "model has no factor");
    const ToralAutomorphism& a = *model.linear;
    if (a.dim() == 2) {
        ch.cells = std::make_shared<MarkovStructure>(build_markov_structure(a));
    } else {
        ch.cells = std::make_shared<MarkovStructure>(MarkovStructure::box_cover(a, opt.box_per_axis));
    }
    ch.expansion = a.unstable_eigenvalues[0];
    auto pi = std::make_shared<SemiConjugacy>(franks_semiconjugacy(model, opt.franks_tol));
    ch.pi = pi;
    if (pi->kind == SemiConjugacy::Kind::Identity)
        ch.base_point = [](const Vec& x) { return x; };
    else
        ch.base_point = [pi](const Vec& x) { return pi->evaluate(x); };
    return ch;
}

}  // namespace ugibbs
