#include "ugibbs/skeleton.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <map>
#include <numeric>

namespace ugibbs {

namespace {

constexpr double kVerifyTol = 1e-10;
constexpr double kMergeTol = 1e-8;

// Periodic coordinates in [0,1), with values within 1e-12 of 1 snapped to 0 so that sorting
// and merging agree across the seam.
Vec canonical(const SystemModel& m, const Vec& x) {
    Vec y = m.wrap(x);
    for (int i = 0; i < y.size(); ++i)
        if (m.periodic[static_cast<std::size_t>(i)] && y[i] > 1.0 - 1e-12) y[i] = 0.0;
    return y;
}

bool lex_less(const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

Mat power_derivative(const SystemModel& m, Vec x, int p) {
    Mat d = Mat::Identity(m.state_dim, m.state_dim);
    for (int i = 0; i < p; ++i) {
        d = m.derivative(x) * d;
        x = m.map(x);
    }
    return d;
}

double closing_error(const SystemModel& m, const Vec& x, int p) { return m.distance(x, m.iterate(x, p)); }

std::optional<Vec> newton(const SystemModel& m, Vec x, int p) {
    const Mat id = Mat::Identity(m.state_dim, m.state_dim);
    for (int it = 0; it < 40; ++it) {
        if (m.domain_margin(x) < 0.0) return std::nullopt;
        const Vec fx = m.iterate(x, p);
        if (m.domain_margin(fx) < 0.0) return std::nullopt;
        const Vec r = m.displacement(x, fx);
        if (!r.allFinite()) return std::nullopt;
        if (r.norm() < 1e-14) break;
        Eigen::FullPivLU<Mat> lu(power_derivative(m, x, p) - id);
        if (!lu.isInvertible()) return std::nullopt;
        const Vec step = lu.solve(r);
        // damped when the linearisation overshoots
        const double s = std::min(1.0, 0.5 / std::max(step.norm(), 1e-300));
        x = m.wrap(x - s * step);
    }
    if (m.domain_margin(x) < 0.0 || closing_error(m, x, p) >= kVerifyTol) return std::nullopt;
    return canonical(m, x);
}

// Merge points closer than kMergeTol, via a grid of cell size 1e-6 and its neighbours.
std::vector<Vec> merge_roots(const SystemModel& m, std::vector<Vec> roots) {
    std::sort(roots.begin(), roots.end(), lex_less);
    const double h = 1e-6;
    std::map<std::vector<std::int64_t>, std::vector<std::size_t>> grid;
    std::vector<Vec> out;
    const int d = m.state_dim;
    const std::int64_t wrap_n = static_cast<std::int64_t>(std::llround(1.0 / h));
    auto key_of = [&](const Vec& x) {
        std::vector<std::int64_t> k(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) k[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(x[i] / h));
        return k;
    };
    int neighbours = 1;
    for (int i = 0; i < d; ++i) neighbours *= 3;
    for (const Vec& x : roots) {
        const auto k = key_of(x);
        bool dup = false;
        for (int code = 0; code < neighbours && !dup; ++code) {
            auto nk = k;
            int c = code;
            for (int i = 0; i < d; ++i, c /= 3) {
                auto& v = nk[static_cast<std::size_t>(i)];
                v += c % 3 - 1;
                if (m.periodic[static_cast<std::size_t>(i)]) v = ((v % wrap_n) + wrap_n) % wrap_n;
            }
            auto it = grid.find(nk);
            if (it == grid.end()) continue;
            for (std::size_t j : it->second)
                if (m.distance(out[j], x) < kMergeTol) dup = true;
        }
        if (dup) continue;
        grid[k].push_back(out.size());
        out.push_back(x);
    }
    return out;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// Lower-triangular column Hermite form: diagonal of L with L Z^d = B Z^d.
std::vector<std::int64_t> hermite_diagonal(IMat b) {
    const int d = static_cast<int>(b.rows());
    std::vector<std::int64_t> diag(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        for (;;) {
            int piv = -1;
            for (int j = i; j < d; ++j)
                if (b(i, j) != 0 && (piv < 0 || std::llabs(b(i, j)) < std::llabs(b(i, piv)))) piv = j;
            if (piv < 0) throw Error(ErrorCode::InvalidParameter, "A^p - I is singular");
            b.col(i).swap(b.col(piv));
            bool done = true;
            for (int j = i + 1; j < d; ++j) {
                if (b(i, j) == 0) continue;
                b.col(j) -= floor_div(b(i, j), b(i, i)) * b.col(i);
                if (b(i, j) != 0) done = false;
            }
            if (done) break;
        }
        diag[static_cast<std::size_t>(i)] = std::llabs(b(i, i));
    }
    return diag;
}

std::vector<Vec> fiber_seeds(const SystemModel& m, int g) {
    std::vector<Vec> out;
    for (const Disk& disk : m.disks) {
        for (int ring = 0; ring < g; ++ring) {
            const double r = 0.9 * disk.radius * ring / g;
            const int count = ring == 0 ? 1 : 4 * ring;
            for (int j = 0; j < count; ++j) {
                const double a = kTwoPi * j / count;
                Vec z(2);
                z << disk.center[0] + r * std::cos(a), disk.center[1] + r * std::sin(a);
                out.push_back(z);
            }
        }
    }
    return out;
}

std::vector<Vec> seeds_for(const FactorChart& chart, int p, int fiber_grid) {
    const SystemModel& m = *chart.model;
    std::vector<Vec> seeds;
    if (m.skew) {
        const int k = m.skew->beta.degree;
        const std::int64_t n = static_cast<std::int64_t>(std::llround(std::pow(static_cast<double>(k), p))) - 1;
        const auto fibers = fiber_seeds(m, fiber_grid);
        for (std::int64_t j = 0; j < n; ++j) {
            const double u = static_cast<double>(j) / static_cast<double>(n);
            const double th = chart.conj ? chart.conj->inverse(u) : u;
            for (const Vec& z : fibers) {
                Vec x(3);
                x << th, z[0], z[1];
                seeds.push_back(x);
            }
        }
        return seeds;
    }
    if (!m.linear) throw Error(ErrorCode::InvalidParameter, "periodic search needs a skew product or a toral factor");
    // the factor semiconjugacy is close to the identity, so the linear points are good seeds
    return toral_periodic_points(m.linear->matrix, p);
}

// First basin hit of the forward orbit of x among the targets other than `skip`.
bool enters_other(const SystemModel& m, const std::vector<BasinTarget>& targets, std::size_t skip, Vec x,
                  int horizon) {
    for (int step = 0; step <= horizon; ++step) {
        for (std::size_t j = 0; j < targets.size(); ++j)
            if (j != skip && in_basin_target(m, targets[j], x)) return true;
        if (step < horizon) x = m.map(x);
        if (m.domain_margin(x) < 0.0) return false;
    }
    return false;
}

std::vector<Vec> leaf_samples(const FactorChart& chart, const Vec& x, const std::vector<Vec>& past, double length,
                             int count) {
    const UnstablePlaque pl = grow_unstable_leaf_from(chart, x, past, -length / 2, length / 2, std::max(count, 8));
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double t = pl.t_lo + (i + 0.5) / count * (pl.t_hi - pl.t_lo);
        out.push_back(chart.model->wrap(leaf_point_at_t(chart, pl, t)));
    }
    return out;
}

// Backward orbits recomputed by inverse_on_image drift off the attractor, so pasts are explicit:
// the cycle itself for periodic points, the forward history otherwise.
std::vector<Vec> leaf_through_orbit(const FactorChart& chart, const SkeletonPoint& s, double length, int count) {
    std::vector<Vec> past;
    const int p = static_cast<int>(s.orbit.size());
    for (int j = 1; j <= 60; ++j) past.push_back(s.orbit[static_cast<std::size_t>(((-j) % p + p) % p)]);
    return leaf_samples(chart, s.point, past, length, count);
}

std::vector<Vec> leaf_after(const FactorChart& chart, Vec x, double length, int count) {
    std::vector<Vec> hist{x};
    for (int i = 0; i < 70; ++i) hist.push_back(chart.model->map(hist.back()));
    const std::vector<Vec> past(hist.rbegin() + 1, hist.rend());
    return leaf_samples(chart, hist.back(), past, length, count);
}

std::vector<int> decode(std::int64_t idx, const std::vector<int>& shape) {
    std::vector<int> out(shape.size());
    for (std::size_t k = 0; k < shape.size(); ++k) {
        out[k] = static_cast<int>(idx % shape[k]);
        idx /= shape[k];
    }
    return out;
}

std::int64_t encode(const std::vector<int>& c, const std::vector<int>& shape) {
    std::int64_t idx = 0;
    for (std::size_t k = shape.size(); k-- > 0;) idx = idx * shape[k] + c[k];
    return idx;
}

// Connected pieces of a box set under the 3^d - 1 neighbourhood; labels follow `boxes`.
std::vector<int> box_pieces(const SystemModel& m, const std::vector<int>& shape, const std::vector<std::int64_t>& boxes,
                            int& count) {
    std::map<std::int64_t, std::size_t> where;
    for (std::size_t i = 0; i < boxes.size(); ++i) where[boxes[i]] = i;
    std::vector<int> label(boxes.size(), -1);
    const int d = static_cast<int>(shape.size());
    int neighbours = 1;
    for (int i = 0; i < d; ++i) neighbours *= 3;
    count = 0;
    for (std::size_t s = 0; s < boxes.size(); ++s) {
        if (label[s] >= 0) continue;
        std::vector<std::size_t> stack{s};
        label[s] = count;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            const auto c = decode(boxes[cur], shape);
            for (int code = 0; code < neighbours; ++code) {
                auto n = c;
                int r = code;
                bool ok = true;
                for (int k = 0; k < d; ++k, r /= 3) {
                    int& v = n[static_cast<std::size_t>(k)];
                    v += r % 3 - 1;
                    const int len = shape[static_cast<std::size_t>(k)];
                    if (m.periodic[static_cast<std::size_t>(k)]) v = (v + len) % len;
                    else if (v < 0 || v >= len) ok = false;
                }
                if (!ok) continue;
                auto it = where.find(encode(n, shape));
                if (it == where.end() || label[it->second] >= 0) continue;
                label[it->second] = count;
                stack.push_back(it->second);
            }
        }
        ++count;
    }
    return label;
}

// Fraction of `occupied` visited by forward orbits of points on a short leaf through x.
double leaf_fill(const FactorChart& chart, const std::vector<Vec>& pts, const std::vector<int>& shape,
                 std::int64_t total, const std::vector<std::int64_t>& occupied, const StructureOptions& opt) {
    if (occupied.empty()) return 0.0;
    const SystemModel& m = *chart.model;
    const std::size_t chunks = 16;
    std::vector<std::vector<char>> seen(chunks, std::vector<char>(static_cast<std::size_t>(total), 0));
    parallel_for(chunks, [&](std::size_t c) {
        auto& mark = seen[c];
        for (std::size_t i = c; i < pts.size(); i += chunks) {
            Vec y = pts[i];
            for (int s = 0; s <= opt.leaf_steps; ++s) {
                if (m.domain_margin(y) < 0.0) break;
                mark[static_cast<std::size_t>(box_index(m, shape, y))] = 1;
                y = m.map(y);
            }
        }
    });
    std::size_t hit = 0;
    for (std::int64_t b : occupied) {
        for (const auto& mark : seen)
            if (mark[static_cast<std::size_t>(b)]) {
                ++hit;
                break;
            }
    }
    return static_cast<double>(hit) / static_cast<double>(occupied.size());
}

}  // namespace

std::vector<Vec> toral_periodic_points(const IMat& a, int p) {
    const int d = static_cast<int>(a.rows());
    IMat b = IMat::Identity(d, d);
    for (int i = 0; i < p; ++i) b = a * b;
    b -= IMat::Identity(d, d);
    const auto diag = hermite_diagonal(b);
    const Eigen::PartialPivLU<Mat> lu(b.cast<double>());
    std::vector<Vec> out;
    std::vector<std::int64_t> m(static_cast<std::size_t>(d), 0);
    for (;;) {
        Vec mv(d);
        for (int i = 0; i < d; ++i) mv[i] = static_cast<double>(m[static_cast<std::size_t>(i)]);
        Vec x = lu.solve(mv);
        for (int i = 0; i < d; ++i) {
            x[i] = wrap01(x[i]);
            if (x[i] > 1.0 - 1e-12) x[i] = 0.0;
        }
        out.push_back(x);
        int k = 0;
        while (k < d && ++m[static_cast<std::size_t>(k)] == diag[static_cast<std::size_t>(k)]) m[static_cast<std::size_t>(k++)] = 0;
        if (k == d) break;
    }
    std::sort(out.begin(), out.end(), lex_less);
    return out;
}

double stable_size(const SystemModel& m, const Vec& x, int period) {
    const double r_max = m.domain == DomainKind::SolidTorus ? 1.0 : 0.5;
    // the reference frame's cs columns are exactly invariant for the shipped families; a
    // numerically computed bundle would leak into the unstable direction
    Mat cs = m.frame.rightCols(m.cs_dim);
    for (int j = 0; j < cs.cols(); ++j) cs.col(j).normalize();
    std::vector<Vec> dirs;
    if (m.cs_dim == 1) {
        dirs = {cs.col(0), Vec(-cs.col(0))};
    } else {
        for (int j = 0; j < 12; ++j) {
            const double ang = kTwoPi * j / 12.0;
            dirs.push_back((std::cos(ang) * cs.col(0) + std::sin(ang) * cs.col(1)).normalized());
        }
        for (int j = 2; j < m.cs_dim; ++j) {
            dirs.push_back(cs.col(j));
            dirs.push_back(-cs.col(j));
        }
    }
    const int blocks = std::max(1, 200 / period);
    // points outside the domain are not part of the phase space and do not count against r
    auto converges = [&](const Vec& dir, double r) {
        Vec y = m.wrap(x + r * dir);
        if (m.domain_margin(y) < 0.0) return true;
        for (int b = 0; b < blocks; ++b) {
            for (int s = 0; s < period; ++s) {
                if (m.domain_margin(y) < 0.0) return false;
                y = m.map(y);
            }
            if (m.distance(x, y) < 0.01 * r) return true;
        }
        return false;
    };
    double best = 0.0;
    for (int j = 10; j >= 0; --j) {
        const double r = r_max * std::ldexp(1.0, -j);
        for (const Vec& dir : dirs)
            if (!converges(dir, r)) return best;
        best = r;
    }
    return best;
}

PeriodicSearch find_periodic(const FactorChart& chart, int max_period, int fiber_grid) {
    if (max_period < 1 || max_period > 12)
        throw Error(ErrorCode::InvalidParameter, "max_period must lie in [1, 12]");
    const SystemModel& m = *chart.model;
    PeriodicSearch out;
    out.max_period = max_period;
    for (int p = 1; p <= max_period; ++p) {
        const auto seeds = seeds_for(chart, p, fiber_grid);
        std::vector<std::optional<Vec>> roots(seeds.size());
        parallel_for(seeds.size(), [&](std::size_t i) { roots[i] = newton(m, seeds[i], p); });
        std::vector<Vec> found;
        std::size_t failed = 0;
        for (auto& r : roots) {
            if (!r) {
                ++failed;
                continue;
            }
            // keep minimal period p only; shorter periods were found earlier
            bool shorter = false;
            for (int q = 1; q < p && !shorter; ++q)
                if (p % q == 0 && closing_error(m, *r, q) < kMergeTol) shorter = true;
            if (!shorter) found.push_back(*r);
        }
        out.seeds.push_back(seeds.size());
        out.divergent.push_back(failed);
        found = merge_roots(m, std::move(found));

        std::vector<char> used(found.size(), 0);
        for (std::size_t i = 0; i < found.size(); ++i) {
            if (used[i]) continue;
            SkeletonPoint s;
            s.point = found[i];
            s.period = p;
            Vec y = found[i];
            for (int k = 0; k < p; ++k) {
                for (std::size_t j = i; j < found.size(); ++j)
                    if (!used[j] && m.distance(found[j], y) < kMergeTol) {
                        used[j] = 1;
                        y = found[j];
                        break;
                    }
                s.orbit.push_back(y);
                y = canonical(m, m.map(y));
            }
            const Mat d = power_derivative(m, s.point, p);
            Eigen::EigenSolver<Mat> es(d, false);
            for (int k = 0; k < es.eigenvalues().size(); ++k) s.multipliers.push_back(es.eigenvalues()[k]);
            std::sort(s.multipliers.begin(), s.multipliers.end(),
                      [](const auto& a, const auto& b) { return std::abs(a) > std::abs(b); });
            s.hyperbolic = true;
            for (const auto& mu : s.multipliers) {
                if (std::abs(mu) < 1.0) ++s.contracting_count;
                if (std::abs(std::abs(mu) - 1.0) <= 1e-6) s.hyperbolic = false;
            }
            if (s.hyperbolic && s.contracting_count == m.cs_dim) s.stable_size_estimate = stable_size(m, s.point, p);
            out.orbits.push_back(std::move(s));
        }
    }
    return out;
}

BasinTarget basin_target(const SkeletonPoint& s, double u_radius) {
    BasinTarget t;
    t.orbit = s.orbit;
    t.u_radius = u_radius;
    t.cs_radius = s.stable_size_estimate;
    return t;
}

std::vector<SkeletonPoint> select_skeleton(const FactorChart& chart, const std::vector<SkeletonPoint>& orbits,
                                           const SkeletonOptions& opt) {
    const SystemModel& m = *chart.model;
    std::vector<SkeletonPoint> kept;
    std::vector<BasinTarget> targets;
    for (const auto& c : orbits) {
        if (!c.hyperbolic || c.contracting_count != m.cs_dim || c.stable_size_estimate <= 0.0) continue;
        bool connected = false;
        if (!targets.empty()) {
            const auto pts = leaf_through_orbit(chart, c, opt.leaf_length, opt.unstable_samples);
            std::vector<char> hit(pts.size(), 0);
            parallel_for(pts.size(), [&](std::size_t i) {
                hit[i] = enters_other(m, targets, targets.size(), pts[i], opt.horizon) ? 1 : 0;
            });
            connected = std::any_of(hit.begin(), hit.end(), [](char h) { return h != 0; });
        }
        if (connected) continue;
        kept.push_back(c);
        targets.push_back(basin_target(c, opt.u_radius));
    }
    return kept;
}

const char* skeleton_status_name(SkeletonStatus s) {
    switch (s) {
        case SkeletonStatus::Skeleton: return "SKELETON";
        case SkeletonStatus::Fail: return "FAIL";
        case SkeletonStatus::Inconclusive: return "INCONCLUSIVE";
    }
    return "UNKNOWN";
}

SkeletonReport verify_skeleton(const FactorChart& chart, const std::vector<SkeletonPoint>& candidates,
                               std::uint64_t seed, const SkeletonOptions& opt) {
    const SystemModel& m = *chart.model;
    SkeletonReport rep;
    rep.points = candidates;
    rep.horizon = opt.horizon;
    rep.basin_hits.assign(candidates.size(), 0);
    if (candidates.empty()) return rep;
    std::vector<BasinTarget> targets;
    for (const auto& c : candidates) targets.push_back(basin_target(c, opt.u_radius));

    Rng rng(seed);
    std::vector<Vec> starts;
    for (int i = 0; i < opt.probes; ++i) starts.push_back(m.random_attractor_point(rng));
    std::vector<int> first(starts.size(), -1);
    parallel_for(starts.size(), [&](std::size_t i) {
        std::vector<Vec> pts;
        try {
            pts = leaf_after(chart, starts[i], opt.leaf_length, opt.probe_samples);
        } catch (const Error&) {
            return;
        }
        for (const Vec& y : pts) {
            const int t = first_target(m, targets, y, opt.horizon);
            if (t >= 0) {
                first[i] = t;
                return;
            }
        }
    });
    rep.probes = starts.size();
    for (int f : first) {
        if (f < 0) ++rep.unresolved;
        else ++rep.basin_hits[static_cast<std::size_t>(f)];
    }

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto pts = leaf_through_orbit(chart, candidates[i], opt.leaf_length, opt.unstable_samples);
        std::vector<char> hit(pts.size(), 0);
        parallel_for(pts.size(), [&](std::size_t k) { hit[k] = enters_other(m, targets, i, pts[k], opt.horizon) ? 1 : 0; });
        rep.cross_hits += static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
    }

    if (rep.cross_hits > 0) rep.status = SkeletonStatus::Fail;
    else if (rep.unresolved > 0) rep.status = SkeletonStatus::Inconclusive;
    else rep.status = SkeletonStatus::Skeleton;
    return rep;
}

StructureReport support_structure(const FactorChart& chart, const GibbsReport& gibbs,
                                  const std::vector<SkeletonPoint>& skeleton, const StructureOptions& opt) {
    const SystemModel& m = *chart.model;
    StructureReport rep;
    rep.box_depth = opt.box_depth;
    rep.shape = box_shape(m, opt.box_depth);
    rep.box_margin = gibbs.box_margin;
    std::int64_t total = 1;
    for (int n : rep.shape) total *= n;

    std::vector<std::int64_t> all;
    for (std::size_t c = 0; c < gibbs.components.size(); ++c) {
        const ParticleMeasure& mu = gibbs.components[c];
        ComponentStructure cs;
        cs.boxes = occupied_boxes(m, mu, opt.box_depth, 5);
        cs.occupied = cs.boxes.size();
        all.insert(all.end(), cs.boxes.begin(), cs.boxes.end());
        const auto piece = box_pieces(m, rep.shape, cs.boxes, cs.connected_components);
        if (mu.size() > 0) {
            const auto start = spread_subsample(mu.size(), 1);
            const auto pts = leaf_after(chart, mu.points.col(static_cast<Eigen::Index>(start[0])), 0.05, opt.leaf_points);
            cs.leaf_fill = leaf_fill(chart, pts, rep.shape, total, cs.boxes, opt);
        }
        for (std::size_t s = 0; s < skeleton.size(); ++s) {
            const bool mine = c < gibbs.component_target.size() && gibbs.component_target[c] >= 0
                                  ? gibbs.component_target[c] == static_cast<int>(s)
                                  : std::binary_search(cs.boxes.begin(), cs.boxes.end(),
                                                       box_index(m, rep.shape, skeleton[s].point));
            if (mine)
                cs.skeleton_fill.emplace_back(
                    static_cast<int>(s), leaf_fill(chart, leaf_through_orbit(chart, skeleton[s], 0.05, opt.leaf_points),
                                                   rep.shape, total, cs.boxes, opt));
        }

        // where f sends each connected piece
        const int np = cs.connected_components;
        std::vector<std::vector<std::size_t>> counts(static_cast<std::size_t>(np), std::vector<std::size_t>(static_cast<std::size_t>(np), 0));
        auto piece_of = [&](const Vec& x) {
            auto it = std::lower_bound(cs.boxes.begin(), cs.boxes.end(), box_index(m, rep.shape, x));
            if (it == cs.boxes.end() || *it != box_index(m, rep.shape, x)) return -1;
            return piece[static_cast<std::size_t>(it - cs.boxes.begin())];
        };
        for (std::size_t i : spread_subsample(mu.size(), opt.map_samples)) {
            const Vec x = mu.points.col(static_cast<Eigen::Index>(i));
            const int a = piece_of(x), b = piece_of(m.map(x));
            if (a >= 0 && b >= 0) ++counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        }
        for (int a = 0; a < np; ++a) {
            const auto& row = counts[static_cast<std::size_t>(a)];
            const std::size_t sum = std::accumulate(row.begin(), row.end(), std::size_t{0});
            const auto best = std::max_element(row.begin(), row.end());
            cs.cycle.push_back(sum > 0 && *best >= 0.9 * static_cast<double>(sum) ? static_cast<int>(best - row.begin()) : -1);
        }
        rep.components.push_back(std::move(cs));
    }
    // the box of p together with its neighbours is a neighbourhood of p; the box alone is not
    // when p sits on a face
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    for (const auto& s : skeleton) {
        const auto o = decode(box_index(m, rep.shape, s.point), rep.shape);
        int n = 0;
        for (std::int64_t b : all) {
            const auto c = decode(b, rep.shape);
            bool adj = true;
            for (std::size_t k = 0; k < c.size() && adj; ++k) {
                int diff = std::abs(c[k] - o[k]);
                if (m.periodic[k]) diff = std::min(diff, rep.shape[k] - diff);
                adj = diff <= 1;
            }
            if (adj) ++n;
        }
        if (n == 0) rep.skeleton_inside = false;
    }
    return rep;
}

std::vector<std::int64_t> run_length(const std::vector<std::int64_t>& sorted_boxes, std::int64_t total) {
    std::vector<std::int64_t> runs;
    std::int64_t pos = 0;
    bool ones = false;
    std::size_t i = 0;
    while (pos < total) {
        std::int64_t len = 0;
        if (!ones) {
            const std::int64_t next = i < sorted_boxes.size() ? sorted_boxes[i] : total;
            len = next - pos;
        } else {
            while (i < sorted_boxes.size() && sorted_boxes[i] == pos + len) {
                ++len;
                ++i;
            }
        }
        runs.push_back(len);
        pos += len;
        ones = !ones;
    }
    return runs;
}

nlohmann::json skeleton_json(const SkeletonReport& r) {
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const auto& s = r.points[i];
        nlohmann::json mult = nlohmann::json::array();
        for (const auto& mu : s.multipliers) mult.push_back({mu.real(), mu.imag()});
        nlohmann::json orbit = nlohmann::json::array();
        for (const auto& y : s.orbit) orbit.push_back(std::vector<double>(y.data(), y.data() + y.size()));
        pts.push_back({{"point", std::vector<double>(s.point.data(), s.point.data() + s.point.size())},
                       {"period", s.period},
                       {"orbit", orbit},
                       {"multipliers", mult},
                       {"contracting_count", s.contracting_count},
                       {"hyperbolic", s.hyperbolic},
                       {"stable_size_estimate", s.stable_size_estimate},
                       {"basin_hits", i < r.basin_hits.size() ? r.basin_hits[i] : 0}});
    }
    return {{"status", skeleton_status_name(r.status)},
            {"count", r.points.size()},
            {"points", pts},
            {"probes", r.probes},
            {"unresolved", r.unresolved},
            {"cross_hits", r.cross_hits},
            {"horizon", r.horizon}};
}

nlohmann::json structure_json(const StructureReport& r) {
    std::int64_t total = 1;
    for (int n : r.shape) total *= n;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : r.components) {
        nlohmann::json fills = nlohmann::json::array();
        for (const auto& [s, f] : c.skeleton_fill) fills.push_back({{"skeleton", s}, {"fill", f}});
        comps.push_back({{"occupied_boxes", c.occupied},
                         {"connected_components", c.connected_components},
                         {"leaf_fill", c.leaf_fill},
                         {"skeleton_fill", fills},
                         {"cycle", c.cycle},
                         {"bitmap_rle", run_length(c.boxes, total)}});
    }
    return {{"box_depth", r.box_depth},
            {"shape", r.shape},
            {"box_margin", std::isfinite(r.box_margin) ? nlohmann::json(r.box_margin) : nlohmann::json(nullptr)},
            {"skeleton_inside", r.skeleton_inside},
            {"components", comps}};
}

}  // namespace ugibbs
