#include "ugibbs/toral.hpp"

#include <algorithm>
#include <complex>

namespace ugibbs {

Mat ToralAutomorphism::eigen_frame() const {
    Mat f(dim(), dim());
    f << unstable_basis, stable_basis;
    return f;
}

Vec ToralAutomorphism::apply(const Vec& x) const {
    Vec y = real_matrix() * x;
    for (int i = 0; i < y.size(); ++i) y[i] = wrap01(y[i]);
    return y;
}

ToralAutomorphism hyperbolic_split(const IMat& matrix) {
    if (matrix.rows() != matrix.cols() || matrix.rows() < 2)
        throw Error(ErrorCode::InvalidParameter, "matrix must be square with d >= 2");
    const Mat m = matrix.cast<double>();
    const double det = m.determinant();
    const long idet = std::lround(det);
    if (std::abs(det - static_cast<double>(idet)) > 1e-6 || std::abs(idet) != 1)
        throw Error(ErrorCode::NotUnimodular, "|det| = " + std::to_string(std::abs(det)));

    Eigen::EigenSolver<Mat> es(m);
    const auto vals = es.eigenvalues();
    const auto vecs = es.eigenvectors();
    for (int i = 0; i < vals.size(); ++i)
        if (std::abs(std::abs(vals[i]) - 1.0) < 1e-9)
            throw Error(ErrorCode::NotHyperbolic, "eigenvalue on the unit circle");

    struct Dir {
        double rate;
        double value;  // signed eigenvalue, NaN for complex pairs
        Vec v;
    };
    std::vector<Dir> uns, sta;
    for (int i = 0; i < vals.size(); ++i) {
        const std::complex<double> lam = vals[i];
        std::vector<Vec> cols;
        double value = std::numeric_limits<double>::quiet_NaN();
        if (std::abs(lam.imag()) < 1e-12) {
            cols.push_back(vecs.col(i).real());
            value = lam.real();
        } else if (lam.imag() > 0) {
            cols.push_back(vecs.col(i).real());
            cols.push_back(vecs.col(i).imag());
        }
        for (Vec v : cols) {
            v.normalize();
            if (v.sum() < 0) v = -v;
            Dir d{std::abs(lam), value, v};
            (std::abs(lam) > 1 ? uns : sta).push_back(d);
        }
    }
    std::stable_sort(uns.begin(), uns.end(), [](const Dir& a, const Dir& b) { return a.rate > b.rate; });
    std::stable_sort(sta.begin(), sta.end(), [](const Dir& a, const Dir& b) { return a.rate < b.rate; });

    ToralAutomorphism a;
    a.matrix = matrix;
    a.det_sign = idet > 0 ? 1 : -1;
    const int d = static_cast<int>(m.rows());
    a.unstable_basis.resize(d, uns.size());
    a.stable_basis.resize(d, sta.size());
    a.unstable_rates.resize(uns.size());
    a.stable_rates.resize(sta.size());
    a.unstable_eigenvalues.resize(uns.size());
    a.stable_eigenvalues.resize(sta.size());
    for (std::size_t i = 0; i < uns.size(); ++i) {
        a.unstable_basis.col(i) = uns[i].v;
        a.unstable_rates[i] = uns[i].rate;
        a.unstable_eigenvalues[i] = uns[i].value;
        a.base_entropy += std::log(uns[i].rate);
    }
    for (std::size_t i = 0; i < sta.size(); ++i) {
        a.stable_basis.col(i) = sta[i].v;
        a.stable_rates[i] = sta[i].rate;
        a.stable_eigenvalues[i] = sta[i].value;
    }

    auto residual = [&](const Mat& basis) {
        if (basis.cols() == 0) return 0.0;
        Mat img = m * basis;
        Mat proj = basis * basis.colPivHouseholderQr().solve(img);
        return (img - proj).colwise().norm().maxCoeff();
    };
    const double res = std::max(residual(a.unstable_basis), residual(a.stable_basis));
    if (res > 1e-12) throw Error(ErrorCode::ConstructionFailed, "invariance residual " + std::to_string(res));
    return a;
}

MarkovStructure MarkovStructure::circle(int degree) {
    if (degree < 2) throw Error(ErrorCode::NotExpanding, "circle degree must be >= 2");
    MarkovStructure ms;
    ms.kind_ = Kind::Circle;
    ms.base_dim_ = 1;
    ms.degree_ = degree;
    ms.cell_count_ = degree;
    ms.expansion_ = degree;
    ms.base_entropy_ = std::log(static_cast<double>(degree));
    ms.transition_ = IMat::Ones(degree, degree);
    ms.plaque_lengths_ = Vec::Constant(degree, 1.0 / degree);
    ms.udir_ = Vec::Ones(1);
    ms.to_eigen_ = Mat::Identity(1, 1);
    ms.frame_ = Mat::Identity(1, 1);
    return ms;
}

MarkovStructure MarkovStructure::box_cover(const ToralAutomorphism& a, int per_axis) {
    if (per_axis < 1) throw Error(ErrorCode::InvalidParameter, "per_axis must be positive");
    if (a.unstable_dim() != 1) throw Error(ErrorCode::UnsupportedDimension, "box cover needs a 1D unstable direction");
    MarkovStructure ms;
    ms.kind_ = Kind::BoxCover;
    ms.base_dim_ = a.dim();
    ms.per_axis_ = per_axis;
    ms.cell_count_ = 1;
    for (int i = 0; i < a.dim(); ++i) ms.cell_count_ *= per_axis;
    ms.expansion_ = a.unstable_eigenvalues[0];
    ms.base_entropy_ = a.base_entropy;
    ms.udir_ = a.unstable_basis.col(0);
    ms.frame_ = a.eigen_frame();
    ms.to_eigen_ = ms.frame_.inverse();
    ms.inverse_ = a.real_matrix().inverse();
    ms.auto_ = a;
    return ms;
}

MarkovStructure MarkovStructure::torus2(const ToralAutomorphism& a) {
    if (a.dim() != 2) throw Error(ErrorCode::UnsupportedDimension, "Markov partitions are built for d <= 2 only");
    const double lam = a.unstable_eigenvalues[0];
    if (!(lam > 0)) throw Error(ErrorCode::ConstructionFailed, "unstable eigenvalue must be positive");

    // Candidate lattice bases (v1 in the open first eigen-quadrant, v2 in the second).
    struct Cand {
        Eigen::Vector2i v1, v2;
        int score;
    };
    for (int flip = 0; flip < 2; ++flip) {
        Mat frame = a.eigen_frame();
        if (flip) frame.col(1) = -frame.col(1);
        const Mat inv = frame.inverse();
        std::vector<Eigen::Vector2i> q1, q2;
        const int range = 6;
        for (int i = -range; i <= range; ++i)
            for (int j = -range; j <= range; ++j) {
                Eigen::Vector2d c = inv * Eigen::Vector2d(i, j);
                if (c[1] <= 1e-9) continue;
                if (c[0] > 1e-9) q1.emplace_back(i, j);
                if (c[0] < -1e-9) q2.emplace_back(i, j);
            }
        std::vector<Cand> cands;
        for (const auto& v1 : q1)
            for (const auto& v2 : q2) {
                if (std::abs(v1[0] * v2[1] - v1[1] * v2[0]) != 1) continue;
                int score = std::max({std::abs(v1[0]), std::abs(v1[1]), std::abs(v2[0]), std::abs(v2[1])});
                cands.push_back({v1, v2, score});
            }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.score < y.score; });
        if (cands.size() > 24) cands.resize(24);

        for (const auto& cand : cands) {
            MarkovStructure ms;
            ms.kind_ = Kind::Torus2;
            ms.base_dim_ = 2;
            ms.expansion_ = lam;
            ms.base_entropy_ = a.base_entropy;
            ms.frame_ = frame;
            ms.to_eigen_ = inv;
            ms.udir_ = frame.col(0);
            ms.inverse_ = a.real_matrix().inverse();
            ms.auto_ = a;
            const Eigen::Vector2d c1 = inv * cand.v1.cast<double>();
            const Eigen::Vector2d c2 = inv * cand.v2.cast<double>();
            const double p = c1[0], q = c1[1], r = -c2[0], t = c2[1];
            ms.rects_ = {Rect{0.0, p, t}, Rect{p, p + r, q}};
            Eigen::Vector2d lo = Eigen::Vector2d::Constant(1e300), hi = -lo;
            for (const auto& rc : ms.rects_)
                for (double u : {rc.u0, rc.u1})
                    for (double s : {0.0, rc.h}) {
                        Eigen::Vector2d x = frame * Eigen::Vector2d(u, s);
                        lo = lo.cwiseMin(x);
                        hi = hi.cwiseMax(x);
                    }
            ms.box_lo_ = lo;
            ms.box_hi_ = hi;

            // Tiling check: every sampled point is covered exactly once.
            Rng rng(mix_seed(17, cand.score));
            bool tiles = true;
            for (int k = 0; k < 400 && tiles; ++k) {
                Vec y(2);
                y << rng.uniform(), rng.uniform();
                const Eigen::Vector2d c = inv * y;
                int hits = 0;
                for (int n0 = static_cast<int>(std::floor(y[0] - hi[0])) - 1; n0 <= std::ceil(y[0] - lo[0]) + 1; ++n0)
                    for (int n1 = static_cast<int>(std::floor(y[1] - hi[1])) - 1; n1 <= std::ceil(y[1] - lo[1]) + 1; ++n1) {
                        Eigen::Vector2d cc = c - inv * Eigen::Vector2d(n0, n1);
                        for (const auto& rc : ms.rects_)
                            if (cc[0] > rc.u0 && cc[0] < rc.u1 && cc[1] > 0 && cc[1] < rc.h) ++hits;
                    }
                if (hits != 1) tiles = false;
            }
            if (!tiles) continue;
            try {
                ms.build_strips();
            } catch (const Error&) {
                continue;
            }
            if (ms.check_markov(2000, 5).ok) return ms;
        }
    }
    throw Error(ErrorCode::ConstructionFailed, "no lattice basis produced a Markov partition");
}

void MarkovStructure::build_strips() {
    const ToralAutomorphism& a = *auto_;
    const double mu = a.stable_eigenvalues[0];
    breaks_.assign(rects_.size(), {});
    cell_base_.assign(rects_.size(), 0);
    strip_target_.clear();
    std::vector<double> lengths;
    int base = 0;
    for (std::size_t r = 0; r < rects_.size(); ++r) {
        const Rect& rc = rects_[r];
        const double s = 0.5 * rc.h;
        auto target = [&](double u) {
            Eigen::Vector2d img(expansion_ * u, mu * s);
            Vec y = wrap(frame_ * img);
            return local(y).rect;
        };
        const int m = 4096;
        std::vector<double> br{rc.u0};
        std::vector<int> tg;
        double prev_u = rc.u0 + 0.5 * (rc.u1 - rc.u0) / m;
        int prev = target(prev_u);
        if (prev < 0) throw Error(ErrorCode::ConstructionFailed, "image sample not located");
        tg.push_back(prev);
        for (int j = 1; j < m; ++j) {
            double u = rc.u0 + (j + 0.5) * (rc.u1 - rc.u0) / m;
            int cur = target(u);
            if (cur < 0) throw Error(ErrorCode::ConstructionFailed, "image sample not located");
            if (cur != prev) {
                double lo = prev_u, hi = u;
                for (int it = 0; it < 80; ++it) {
                    double mid = 0.5 * (lo + hi);
                    (target(mid) == prev ? lo : hi) = mid;
                }
                br.push_back(0.5 * (lo + hi));
                tg.push_back(cur);
            }
            prev = cur;
            prev_u = u;
        }
        br.push_back(rc.u1);
        cell_base_[r] = base;
        for (std::size_t k = 0; k + 1 < br.size(); ++k) {
            lengths.push_back(br[k + 1] - br[k]);
            strip_target_.push_back(tg[k]);
        }
        base += static_cast<int>(br.size()) - 1;
        breaks_[r] = std::move(br);
    }
    cell_count_ = base;
    plaque_lengths_ = Eigen::Map<Vec>(lengths.data(), lengths.size());
    transition_ = IMat::Zero(cell_count_, cell_count_);
    for (int c = 0; c < cell_count_; ++c) {
        const int j = strip_target_[c];
        const int first = cell_base_[j];
        const int count = static_cast<int>(breaks_[j].size()) - 1;
        for (int k = 0; k < count; ++k) transition_(c, first + k) = 1;
    }
}

double MarkovStructure::pf_eigenvalue() const {
    if (kind_ == Kind::BoxCover) return expansion_;
    Eigen::EigenSolver<Mat> es(transition_.cast<double>(), false);
    double best = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) best = std::max(best, std::abs(es.eigenvalues()[i]));
    return best;
}

double MarkovStructure::unstable_coordinate(const Vec& displacement) const {
    return to_eigen_.row(0).dot(displacement);
}

Vec MarkovStructure::stable_coordinates(const Vec& displacement) const {
    return to_eigen_.bottomRows(to_eigen_.rows() - 1) * displacement;
}

Vec MarkovStructure::wrap(const Vec& base) const {
    Vec y = base;
    for (int i = 0; i < y.size(); ++i) y[i] = wrap01(y[i]);
    return y;
}

Vec MarkovStructure::displacement(const Vec& from, const Vec& to) const {
    Vec d = to - from;
    for (int i = 0; i < d.size(); ++i) d[i] = wrap_half(d[i]);
    return d;
}

MarkovStructure::Local MarkovStructure::local(const Vec& base) const {
    constexpr double tol = 1e-12;
    const Eigen::Vector2d y(wrap01(base[0]), wrap01(base[1]));
    const Eigen::Vector2d c = to_eigen_ * y;
    Local best;
    int best_cell = std::numeric_limits<int>::max();
    const int n0lo = static_cast<int>(std::floor(y[0] - box_hi_[0])) - 1, n0hi = static_cast<int>(std::ceil(y[0] - box_lo_[0])) + 1;
    const int n1lo = static_cast<int>(std::floor(y[1] - box_hi_[1])) - 1, n1hi = static_cast<int>(std::ceil(y[1] - box_lo_[1])) + 1;
    for (int n0 = n0lo; n0 <= n0hi; ++n0)
        for (int n1 = n1lo; n1 <= n1hi; ++n1) {
            const Eigen::Vector2d cc = c - to_eigen_ * Eigen::Vector2d(n0, n1);
            for (std::size_t r = 0; r < rects_.size(); ++r) {
                const Rect& rc = rects_[r];
                if (cc[0] < rc.u0 - tol || cc[0] > rc.u1 + tol || cc[1] < -tol || cc[1] > rc.h + tol) continue;
                const double u = std::clamp(cc[0], rc.u0, rc.u1);
                const double s = std::clamp(cc[1], 0.0, rc.h);
                int cell = breaks_.empty() ? static_cast<int>(r) : cell_base_[r] + strip_of(static_cast<int>(r), u);
                if (cell < best_cell) {
                    best_cell = cell;
                    best = Local{static_cast<int>(r), u, s};
                }
            }
        }
    return best;
}

int MarkovStructure::strip_of(int rect, double u) const {
    const auto& br = breaks_[rect];
    const int count = static_cast<int>(br.size()) - 1;
    for (int k = 0; k < count; ++k)
        if (u <= br[k + 1] + 1e-12) return k;
    return count - 1;
}

int MarkovStructure::locate(const Vec& base) const {
    switch (kind_) {
        case Kind::Circle: return std::min(degree_ - 1, static_cast<int>(wrap01(base[0]) * degree_));
        case Kind::BoxCover: {
            int cell = 0, stride = 1;
            for (int i = 0; i < base_dim_; ++i) {
                int k = std::min(per_axis_ - 1, static_cast<int>(wrap01(base[i]) * per_axis_));
                cell += stride * k;
                stride *= per_axis_;
            }
            return cell;
        }
        case Kind::Torus2: {
            Local l = local(base);
            if (l.rect < 0) return -1;
            return cell_base_[l.rect] + strip_of(l.rect, l.u);
        }
    }
    return -1;
}

PlaqueSpan MarkovStructure::unstable_span(const Vec& base) const {
    PlaqueSpan sp;
    switch (kind_) {
        case Kind::Circle: {
            const double u = wrap01(base[0]);
            sp.cell = locate(base);
            sp.below = u - static_cast<double>(sp.cell) / degree_;
            sp.above = static_cast<double>(sp.cell + 1) / degree_ - u;
            break;
        }
        case Kind::BoxCover: {
            sp.cell = locate(base);
            double tlo = -1e300, thi = 1e300;
            int rem = sp.cell;
            for (int i = 0; i < base_dim_; ++i) {
                const int k = rem % per_axis_;
                rem /= per_axis_;
                const double lo = static_cast<double>(k) / per_axis_, hi = static_cast<double>(k + 1) / per_axis_;
                const double y = wrap01(base[i]), d = udir_[i];
                if (std::abs(d) < 1e-300) continue;
                const double a = (lo - y) / d, b = (hi - y) / d;
                tlo = std::max(tlo, std::min(a, b));
                thi = std::min(thi, std::max(a, b));
            }
            sp.below = std::max(0.0, -tlo);
            sp.above = std::max(0.0, thi);
            break;
        }
        case Kind::Torus2: {
            Local l = local(base);
            if (l.rect < 0) return sp;
            const int k = strip_of(l.rect, l.u);
            sp.cell = cell_base_[l.rect] + k;
            sp.below = l.u - breaks_[l.rect][k];
            sp.above = breaks_[l.rect][k + 1] - l.u;
            break;
        }
    }
    return sp;
}

PlaqueSpan MarkovStructure::stable_span(const Vec& base) const {
    PlaqueSpan sp;
    sp.cell = locate(base);
    if (kind_ == Kind::Torus2) {
        Local l = local(base);
        if (l.rect < 0) return sp;
        sp.below = l.s;
        sp.above = rects_[l.rect].h - l.s;
    }
    return sp;
}

std::optional<double> MarkovStructure::bracket_offset(const Vec& a, const Vec& b) const {
    if (kind_ == Kind::Torus2) {
        const Local la = local(a), lb = local(b);
        if (la.rect < 0 || la.rect != lb.rect) return std::nullopt;
        const int k = strip_of(la.rect, la.u);
        const double lo = breaks_[la.rect][k], hi = breaks_[la.rect][k + 1];
        if (lb.u < lo - 1e-12 || lb.u > hi + 1e-12) return std::nullopt;
        return lb.u - la.u;
    }
    const double tau = unstable_coordinate(displacement(a, b));
    if (kind_ == Kind::Circle) return tau;
    const PlaqueSpan sp = unstable_span(a);
    if (tau < -sp.below - 1e-12 || tau > sp.above + 1e-12) return std::nullopt;
    return tau;
}

std::optional<Vec> MarkovStructure::bracket(const Vec& a, const Vec& b) const {
    const auto tau = bracket_offset(a, b);
    if (!tau) return std::nullopt;
    return wrap(a + udir_ * *tau);
}

MarkovCheckReport MarkovStructure::check_markov(std::size_t samples, std::uint64_t seed) const {
    MarkovCheckReport rep;
    if (kind_ == Kind::Circle) {
        rep.samples = samples;
        return rep;
    }
    if (kind_ == Kind::BoxCover) {
        rep.ok = false;
        return rep;
    }
    const ToralAutomorphism& a = *auto_;
    const double mu = a.stable_eigenvalues[0];
    Rng rng(seed);
    const std::size_t per_cell = std::max<std::size_t>(1, samples / cell_count_);
    for (std::size_t r = 0; r < rects_.size(); ++r) {
        const auto& br = breaks_[r];
        for (std::size_t k = 0; k + 1 < br.size(); ++k) {
            for (std::size_t n = 0; n < per_cell; ++n) {
                const double u = br[k] + (1e-4 + (1 - 2e-4) * rng.uniform()) * (br[k + 1] - br[k]);
                const double s = (1e-4 + (1 - 2e-4) * rng.uniform()) * rects_[r].h;
                const Vec x = wrap(frame_ * Eigen::Vector2d(u, s));
                const Vec y = a.apply(x);
                const PlaqueSpan ux = unstable_span(x), uy = unstable_span(y);
                const PlaqueSpan sx = stable_span(x), sy = stable_span(y);
                const double gap = std::max(uy.below - expansion_ * ux.below, uy.above - expansion_ * ux.above);
                double esc;
                if (mu > 0)
                    esc = std::max(mu * sx.below - sy.below, mu * sx.above - sy.above);
                else
                    esc = std::max(-mu * sx.below - sy.above, -mu * sx.above - sy.below);
                rep.worst_unstable_cover = std::max(rep.worst_unstable_cover, gap);
                rep.worst_stable_escape = std::max(rep.worst_stable_escape, esc);
                ++rep.samples;
            }
        }
        // Total stable boundary forward invariant, unstable boundary backward invariant.
        const Rect& rc = rects_[r];
        for (std::size_t n = 0; n < per_cell; ++n) {
            const double s = rng.uniform() * rc.h;
            for (double u : {rc.u0, rc.u1}) {
                const Vec y = a.apply(wrap(frame_ * Eigen::Vector2d(u, s)));
                const PlaqueSpan sp = unstable_span(y);
                rep.worst_boundary_s = std::max(rep.worst_boundary_s, std::min(sp.below, sp.above));
            }
            const double u = rc.u0 + rng.uniform() * (rc.u1 - rc.u0);
            for (double sb : {0.0, rc.h}) {
                Vec z = inverse_ * wrap(frame_ * Eigen::Vector2d(u, sb));
                const PlaqueSpan sp = stable_span(wrap(z));
                rep.worst_boundary_u = std::max(rep.worst_boundary_u, std::min(sp.below, sp.above));
            }
        }
    }
    rep.ok = rep.worst_unstable_cover < 1e-9 && rep.worst_stable_escape < 1e-9 && rep.worst_boundary_s < 1e-9 &&
             rep.worst_boundary_u < 1e-9;
    return rep;
}

std::vector<BoundarySegment> MarkovStructure::boundary_s() const {
    std::vector<BoundarySegment> out;
    for (std::size_t r = 0; r < rects_.size(); ++r)
        for (double u : breaks_[r]) out.push_back({{u, 0.0}, {u, rects_[r].h}});
    return out;
}

std::vector<BoundarySegment> MarkovStructure::boundary_u() const {
    std::vector<BoundarySegment> out;
    for (const auto& rc : rects_) {
        out.push_back({{rc.u0, 0.0}, {rc.u1, 0.0}});
        out.push_back({{rc.u0, rc.h}, {rc.u1, rc.h}});
    }
    return out;
}

nlohmann::json MarkovStructure::to_json() const {
    nlohmann::json j;
    const char* kinds[] = {"circle", "torus2", "box_cover"};
    j["kind"] = kinds[static_cast<int>(kind_)];
    j["cell_count"] = cell_count_;
    j["expansion"] = expansion_;
    j["base_entropy"] = base_entropy_;
    j["pf_eigenvalue"] = pf_eigenvalue();
    if (kind_ == Kind::BoxCover) {
        j["per_axis"] = per_axis_;
        return j;
    }
    nlohmann::json cells = nlohmann::json::array();
    if (kind_ == Kind::Circle) {
        for (int i = 0; i < degree_; ++i)
            cells.push_back({{"index", i}, {"arc", {static_cast<double>(i) / degree_, static_cast<double>(i + 1) / degree_}}});
    } else {
        for (std::size_t r = 0; r < rects_.size(); ++r) {
            const auto& br = breaks_[r];
            for (std::size_t k = 0; k + 1 < br.size(); ++k) {
                nlohmann::json eig = nlohmann::json::array(), tor = nlohmann::json::array();
                for (auto [u, s] : {std::pair{br[k], 0.0}, {br[k + 1], 0.0}, {br[k + 1], rects_[r].h}, {br[k], rects_[r].h}}) {
                    eig.push_back({u, s});
                    Eigen::Vector2d x = frame_ * Eigen::Vector2d(u, s);
                    tor.push_back({x[0], x[1]});
                }
                cells.push_back({{"index", cell_base_[r] + static_cast<int>(k)},
                                 {"rect", r},
                                 {"eigen_vertices", eig},
                                 {"torus_vertices", tor},
                                 {"unstable_length", br[k + 1] - br[k]}});
            }
        }
    }
    j["cells"] = cells;
    nlohmann::json t = nlohmann::json::array();
    for (int i = 0; i < transition_.rows(); ++i) {
        std::vector<int> row(transition_.cols());
        for (int k = 0; k < transition_.cols(); ++k) row[k] = transition_(i, k);
        t.push_back(row);
    }
    j["transition"] = t;
    j["plaque_lengths"] = std::vector<double>(plaque_lengths_.data(), plaque_lengths_.data() + plaque_lengths_.size());
    return j;
}

MarkovStructure build_markov_structure(const ToralAutomorphism& a) {
    if (a.dim() >= 3) throw Error(ErrorCode::UnsupportedDimension, "no Markov partition for d >= 3; use a box cover");
    return MarkovStructure::torus2(a);
}

MarkovStructure build_markov_structure(int circle_degree) { return MarkovStructure::circle(circle_degree); }

BoundaryNullReport boundary_null_check(const MarkovStructure& ms, std::size_t n_lines,
                                       const std::vector<double>& deltas, std::uint64_t seed) {
    BoundaryNullReport rep;
    rep.deltas = deltas;
    rep.fractions.assign(deltas.size(), 0.0);
    Rng rng(seed);
    const int samples = 20000;
    const double length = 1.0;
    std::size_t total = 0;
    for (std::size_t l = 0; l < n_lines; ++l) {
        Vec start(ms.base_dim());
        for (int i = 0; i < start.size(); ++i) start[i] = rng.uniform();
        for (int k = 0; k < samples; ++k) {
            const double t = length * (k + 0.5) / samples;
            const PlaqueSpan sp = ms.unstable_span(ms.wrap(start + ms.unstable_step(t)));
            const double dist = std::min(sp.below, sp.above);
            for (std::size_t d = 0; d < deltas.size(); ++d)
                if (dist < deltas[d]) rep.fractions[d] += 1.0;
            ++total;
        }
    }
    for (auto& f : rep.fractions) f /= static_cast<double>(std::max<std::size_t>(1, total));
    const LinearFit fit = fit_line(rep.deltas, rep.fractions);
    rep.slope = fit.slope;
    rep.intercept = fit.intercept;
    rep.ok = std::isfinite(fit.slope) && std::abs(fit.intercept) < 1e-3;
    return rep;
}

}  // namespace ugibbs
