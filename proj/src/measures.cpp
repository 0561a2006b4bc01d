#include "ugibbs/measures.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>

namespace ugibbs {

namespace {

PlaqueGroup group_of(const UnstablePlaque& pl, int generation = 0) {
    return {pl.cell_id, pl.base_anchor, pl.t_lo, pl.t_hi, generation};
}

// Sorted (word, weight) histogram.
std::vector<std::pair<std::int64_t, double>> histogram(const std::vector<std::int64_t>& words,
                                                       const std::vector<double>& weights,
                                                       const std::vector<std::size_t>& idx) {
    std::vector<std::pair<std::int64_t, double>> h;
    h.reserve(idx.size());
    for (std::size_t i : idx) h.emplace_back(words[i], weights[i]);
    std::sort(h.begin(), h.end());
    std::vector<std::pair<std::int64_t, double>> out;
    for (const auto& [w, v] : h) {
        if (!out.empty() && out.back().first == w)
            out.back().second += v;
        else
            out.emplace_back(w, v);
    }
    double total = 0.0;
    for (const auto& e : out) total += e.second;
    for (auto& e : out) e.second /= total;
    return out;
}

double l1(const std::vector<std::pair<std::int64_t, double>>& a, const std::vector<std::pair<std::int64_t, double>>& b) {
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            d += a[i++].second;
        } else if (i == a.size() || b[j].first < a[i].first) {
            d += b[j++].second;
        } else {
            d += std::abs(a[i++].second - b[j++].second);
        }
    }
    return d;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

}  // namespace

bool passes_floor(std::size_t particles, std::size_t occupied) {
    return occupied > 0 && static_cast<double>(particles) / static_cast<double>(occupied) >= 5.0;
}

std::vector<std::pair<std::int64_t, double>> word_histogram(const std::vector<std::int64_t>& words,
                                                            const std::vector<double>& weights) {
    return histogram(words, weights, all_indices(words.size()));
}

double ParticleMeasure::total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

void ParticleMeasure::normalize() {
    const double s = total_weight();
    for (double& w : weights) w /= s;
}

void ParticleMeasure::reserve(std::size_t n) {
    weights.reserve(n);
    param.reserve(n);
    group.reserve(n);
    label.reserve(n);
}

void ParticleMeasure::append(const ParticleMeasure& other, double scale) {
    if (dim == 0) dim = other.dim;
    const Eigen::Index old = points.cols();
    points.conservativeResize(dim, old + other.points.cols());
    points.rightCols(other.points.cols()) = other.points;
    const int offset = static_cast<int>(groups.size());
    groups.insert(groups.end(), other.groups.begin(), other.groups.end());
    for (std::size_t i = 0; i < other.size(); ++i) {
        weights.push_back(other.weights[i] * scale);
        param.push_back(other.param[i]);
        group.push_back(other.group[i] + offset);
        label.push_back(other.label[i]);
    }
}

ParticleMeasure ParticleMeasure::subset(const std::vector<std::size_t>& idx) const {
    ParticleMeasure out;
    out.dim = dim;
    out.provenance = provenance;
    out.groups = groups;
    out.points.resize(dim, static_cast<Eigen::Index>(idx.size()));
    out.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const std::size_t i = idx[k];
        out.points.col(static_cast<Eigen::Index>(k)) = points.col(static_cast<Eigen::Index>(i));
        out.weights.push_back(weights[i]);
        out.param.push_back(param[i]);
        out.group.push_back(group[i]);
        out.label.push_back(label[i]);
    }
    out.normalize();
    return out;
}

Vec ParticleMeasure::base_point(const FactorChart& chart, std::size_t i) const {
    const PlaqueGroup& g = groups[group[i]];
    return chart.cells->wrap(g.base_anchor + chart.cells->unstable_step(param[i]));
}

ParticleMeasure dirac(const FactorChart& chart, const Vec& x) {
    return periodic_measure(chart, {x});
}

ParticleMeasure periodic_measure(const FactorChart& chart, const std::vector<Vec>& orbit) {
    if (orbit.empty()) throw Error(ErrorCode::InvalidParameter, "empty orbit");
    ParticleMeasure mu;
    mu.dim = static_cast<int>(orbit[0].size());
    mu.points.resize(mu.dim, static_cast<Eigen::Index>(orbit.size()));
    for (std::size_t i = 0; i < orbit.size(); ++i) {
        const Vec x = chart.model->wrap(orbit[i]);
        mu.points.col(static_cast<Eigen::Index>(i)) = x;
        const Vec b = chart.base_point(x);
        mu.groups.push_back({chart.cells->locate(b), b, 0.0, 0.0, 0});
        mu.weights.push_back(1.0 / static_cast<double>(orbit.size()));
        mu.param.push_back(0.0);
        mu.group.push_back(static_cast<int>(i));
        mu.label.push_back(-1);
    }
    mu.provenance = orbit.size() == 1 ? "dirac" : "periodic(" + std::to_string(orbit.size()) + ")";
    return mu;
}

ParticleMeasure reference_measure(const FactorChart& chart, const UnstablePlaque& plaque, int n, std::uint64_t seed,
                                  bool jitter) {
    if (n < 1) throw Error(ErrorCode::InvalidParameter, "reference measure needs at least one particle");
    ParticleMeasure mu;
    mu.dim = static_cast<int>(plaque.anchor.size());
    mu.points.resize(mu.dim, n);
    mu.groups.push_back(group_of(plaque));
    mu.reserve(static_cast<std::size_t>(n));
    Rng rng(seed);
    const double L = plaque.length();
    for (int i = 0; i < n; ++i) {
        const double u = jitter ? rng.uniform() : 0.5;
        const double t = plaque.t_lo + (i + u) / n * L;
        mu.points.col(i) = chart.model->wrap(leaf_point_at_t(chart, plaque, t));
        mu.weights.push_back(1.0 / n);
        mu.param.push_back(t);
        mu.group.push_back(0);
        mu.label.push_back(-1);
    }
    mu.provenance = "reference(" + std::to_string(plaque.cell_id) + ")";
    return mu;
}

PushResult push_forward(const FactorChart& chart, const ParticleMeasure& mu) {
    const SystemModel& m = *chart.model;
    const double lambda = chart.expansion;
    PushResult res;
    ParticleMeasure& im = res.image;
    im.dim = mu.dim;
    im.provenance = mu.provenance + "+push";

    // pieces of every source group
    std::vector<std::vector<ImagePiece>> pieces(mu.groups.size());
    std::vector<Vec> bases(mu.groups.size());
    for (std::size_t g = 0; g < mu.groups.size(); ++g) {
        const PlaqueGroup& pg = mu.groups[g];
        bases[g] = base_image(chart, pg.base_anchor);
        pieces[g] = split_line(chart, bases[g], lambda * pg.t_lo, lambda * pg.t_hi);
    }
    std::map<std::pair<int, int>, int> new_group;
    std::vector<std::vector<double>> mass(mu.groups.size());
    for (std::size_t g = 0; g < mu.groups.size(); ++g) mass[g].assign(pieces[g].size(), 0.0);

    std::vector<std::size_t> kept;
    std::vector<int> kept_group;
    std::vector<double> kept_param;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const int g = mu.group[i];
        const double t = lambda * mu.param[i];
        const auto& ps = pieces[g];
        int which = -1;
        for (std::size_t k = 0; k < ps.size(); ++k) {
            if (t >= ps[k].a - 1e-12 && t <= ps[k].b + 1e-12) {
                which = static_cast<int>(k);
                break;
            }
        }
        if (which < 0) {
            ++res.lost;
            continue;
        }
        mass[g][which] += mu.weights[i];
        const auto key = std::make_pair(g, which);
        auto it = new_group.find(key);
        if (it == new_group.end()) {
            const ImagePiece& p = ps[which];
            const double mid = 0.5 * (p.a + p.b);
            PlaqueGroup ng{p.cell, chart.cells->wrap(bases[g] + chart.cells->unstable_step(mid)), p.a - mid,
                           p.b - mid, mu.groups[g].generation + 1};
            it = new_group.emplace(key, static_cast<int>(im.groups.size())).first;
            im.groups.push_back(ng);
        }
        const ImagePiece& p = ps[which];
        kept.push_back(i);
        kept_group.push_back(it->second);
        kept_param.push_back(t - 0.5 * (p.a + p.b));
    }
    if (static_cast<double>(res.lost) >= 1e-3 * static_cast<double>(mu.size()) && res.lost > 0)
        throw Error(ErrorCode::LostParticle, std::to_string(res.lost) + " particles lost");

    im.points.resize(mu.dim, static_cast<Eigen::Index>(kept.size()));
    std::vector<Vec> images(kept.size());
    parallel_for(kept.size(), [&](std::size_t k) { images[k] = m.map(mu.points.col(static_cast<Eigen::Index>(kept[k]))); });
    for (std::size_t k = 0; k < kept.size(); ++k) {
        im.points.col(static_cast<Eigen::Index>(k)) = images[k];
        im.weights.push_back(mu.weights[kept[k]]);
        im.param.push_back(kept_param[k]);
        im.group.push_back(kept_group[k]);
        im.label.push_back(mu.label[kept[k]]);
    }
    im.normalize();

    for (std::size_t g = 0; g < mu.groups.size(); ++g) {
        BranchWeights bw;
        bw.source_group = static_cast<int>(g);
        const double total = std::accumulate(mass[g].begin(), mass[g].end(), 0.0);
        for (std::size_t k = 0; k < pieces[g].size(); ++k) {
            bw.cells.push_back(pieces[g][k].cell);
            bw.theoretical.push_back(pieces[g][k].weight);
            bw.empirical.push_back(total > 0 ? mass[g][k] / total : 0.0);
        }
        res.branches.push_back(std::move(bw));
    }
    return res;
}

double branch_weight_spread(const FactorChart& chart, const std::vector<UnstablePlaque>& plaques) {
    std::map<std::tuple<int, int, int>, std::vector<double>> by_key;
    for (const auto& pl : plaques) {
        const auto pieces = split_line(chart, base_image(chart, pl.base_anchor), chart.expansion * pl.t_lo,
                                       chart.expansion * pl.t_hi);
        std::map<int, int> seen;
        for (const auto& p : pieces) by_key[{pl.cell_id, p.cell, seen[p.cell]++}].push_back(p.weight);
    }
    double worst = 0.0;
    for (const auto& [key, ws] : by_key) {
        if (ws.size() < 2) continue;
        const auto [lo, hi] = std::minmax_element(ws.begin(), ws.end());
        const double mean = std::accumulate(ws.begin(), ws.end(), 0.0) / static_cast<double>(ws.size());
        worst = std::max(worst, (*hi - *lo) / mean);
    }
    return worst;
}

CesaroResult cesaro_state(const FactorChart& chart, const UnstablePlaque& seed_plaque, const CesaroOptions& opt,
                          std::uint64_t seed) {
    if (opt.iterations < 1 || opt.particles < 1 || opt.walkers < 1)
        throw Error(ErrorCode::InvalidParameter, "iterations, particles and walkers must be positive");
    CesaroResult res;
    if (opt.iterations == 1) {
        res.measure = reference_measure(chart, seed_plaque, opt.particles, seed, opt.jitter);
        return res;
    }
    const int n = opt.iterations, W = opt.walkers, N = opt.particles / opt.walkers;
    if (N < 1) throw Error(ErrorCode::InvalidParameter, "fewer particles than walkers");
    const std::size_t total = static_cast<std::size_t>(n) * W * N;
    ParticleMeasure& mu = res.measure;
    mu.dim = static_cast<int>(seed_plaque.anchor.size());
    mu.points.resize(mu.dim, static_cast<Eigen::Index>(total));
    mu.weights.assign(total, 1.0 / static_cast<double>(total));
    mu.param.assign(total, 0.0);
    mu.group.assign(total, 0);
    mu.label.assign(total, -1);
    mu.groups.resize(static_cast<std::size_t>(n) * W);
    mu.provenance = "cesaro(" + std::to_string(n) + "," + std::to_string(seed_plaque.cell_id) + ")";

    parallel_for(static_cast<std::size_t>(W), [&](std::size_t w) {
        Rng walk(mix_seed(seed, 2 * w));
        Rng jit(mix_seed(seed, 2 * w + 1));
        // one shift per plaque, rotated by the golden ratio across generations
        const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
        double shift = jit.uniform();
        // branch uniforms are stratified within blocks of generations (shuffled strata)
        constexpr int block = 64;
        std::vector<int> strata(block);
        UnstablePlaque pl = seed_plaque;
        for (int j = 0; j < n; ++j) {
            const std::size_t g = w * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
            mu.groups[g] = group_of(pl, j);
            const double L = pl.length();
            shift = std::fmod(shift + golden, 1.0);
            for (int i = 0; i < N; ++i) {
                const double u = opt.jitter ? shift : 0.5;
                const double t = pl.t_lo + (i + u) / N * L;
                const std::size_t slot = g * static_cast<std::size_t>(N) + static_cast<std::size_t>(i);
                mu.points.col(static_cast<Eigen::Index>(slot)) = chart.model->wrap(leaf_point_at_t(chart, pl, t));
                mu.param[slot] = t;
                mu.group[slot] = static_cast<int>(g);
            }
            if (j + 1 == n) break;
            const PlaqueImage img = push_plaque(chart, pl);
            if (j % block == 0) {
                std::iota(strata.begin(), strata.end(), 0);
                for (int k = block - 1; k > 0; --k)
                    std::swap(strata[k], strata[walk.below(static_cast<std::size_t>(k) + 1)]);
            }
            double r = (strata[j % block] + walk.uniform()) / block, acc = 0.0, wsum = 0.0;
            for (const auto& p : img.pieces) wsum += p.weight;
            r *= wsum;
            std::size_t pick = img.pieces.size() - 1;
            for (std::size_t k = 0; k < img.pieces.size(); ++k) {
                acc += img.pieces[k].weight;
                if (r < acc) {
                    pick = k;
                    break;
                }
            }
            const ImagePiece& p = img.pieces[pick];
            pl = restrict_plaque(chart, img.image, p.cell, p.a, p.b, 0.5 * (p.a + p.b), opt.resolution);
        }
    });

    if (opt.curve) {
        const auto words = cylinder_words(chart, mu, opt.depth);
        for (int m : {n / 8, n / 4, n / 2}) {
            if (m < 1) continue;
            std::vector<std::size_t> a, b;
            for (std::size_t i = 0; i < total; ++i) {
                const int gen = mu.groups[mu.group[i]].generation;
                if (gen < m) a.push_back(i);
                if (gen < 2 * m) b.push_back(i);
            }
            const auto ha = histogram(words, mu.weights, a), hb = histogram(words, mu.weights, b);
            const bool ok = passes_floor(a.size(), ha.size()) && passes_floor(b.size(), hb.size());
            res.curve.push_back({m, ok ? l1(ha, hb) : std::numeric_limits<double>::quiet_NaN()});
        }
    }
    return res;
}

namespace {

template <class Start, class Symbol, class Step>
std::vector<std::int64_t> parallel_words(std::size_t n, int depth, std::int64_t base, Start start, Symbol symbol,
                                         Step step) {
    std::vector<std::int64_t> words(n);
    parallel_for(n, [&](std::size_t i) {
        Vec x = start(i);
        std::int64_t w = 0;
        for (int d = 0; d < depth; ++d) {
            w = w * base + symbol(x);
            if (d + 1 < depth) x = step(x);
        }
        words[i] = w;
    });
    return words;
}

}  // namespace

std::vector<std::size_t> spread_subsample(std::size_t n, std::size_t max_count) {
    std::vector<std::size_t> out;
    if (max_count == 0 || n <= max_count) {
        out.resize(n);
        std::iota(out.begin(), out.end(), std::size_t{0});
        return out;
    }
    // one index per stratum [k n / m, (k+1) n / m) (integer bounds), offset by a golden-ratio sequence so strata
    // that are multiples of the plaque size do not always pick the same slot
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    out.reserve(max_count);
    for (std::size_t k = 0; k < max_count; ++k) {
        const std::size_t lo = k * n / max_count, hi = (k + 1) * n / max_count;
        const double frac = std::fmod(static_cast<double>(k) * golden, 1.0);
        out.push_back(lo + static_cast<std::size_t>(frac * static_cast<double>(hi - lo)));
    }
    return out;
}

std::vector<std::int64_t> cylinder_words(const FactorChart& chart, const ParticleMeasure& mu, int depth) {
    if (depth < 1) throw Error(ErrorCode::InvalidParameter, "depth must be positive");
    return parallel_words(
        mu.size(), depth, chart.coarse_count(), [&](std::size_t i) -> Vec { return mu.points.col(static_cast<Eigen::Index>(i)); },
        [&](const Vec& x) { return chart.coarse_symbol(x); }, [&](const Vec& x) { return chart.model->map(x); });
}

int feasible_depth(const FactorChart& chart, const ParticleMeasure& a, const ParticleMeasure& b, int max_depth) {
    for (int d = max_depth; d >= 1; --d) {
        const auto wa = cylinder_words(chart, a, d), wb = cylinder_words(chart, b, d);
        const auto ha = histogram(wa, a.weights, all_indices(a.size()));
        const auto hb = histogram(wb, b.weights, all_indices(b.size()));
        if (passes_floor(a.size(), ha.size()) && passes_floor(b.size(), hb.size())) return d;
    }
    return 0;
}

double weak_distance(const FactorChart& chart, const ParticleMeasure& a, const ParticleMeasure& b, int depth) {
    const auto wa = cylinder_words(chart, a, depth), wb = cylinder_words(chart, b, depth);
    const auto ha = histogram(wa, a.weights, all_indices(a.size()));
    const auto hb = histogram(wb, b.weights, all_indices(b.size()));
    if (!passes_floor(a.size(), ha.size()) || !passes_floor(b.size(), hb.size()))
        throw Error(ErrorCode::DepthTooLarge, "fewer than 5 particles per occupied cylinder at depth " +
                                                  std::to_string(depth));
    return l1(ha, hb);
}

double base_histogram_distance(const FactorChart& chart, const ParticleMeasure& mu, int depth) {
    if (depth < 1) throw Error(ErrorCode::InvalidParameter, "depth must be positive");
    const MarkovStructure& cells = *chart.cells;
    const int bd = cells.base_dim();
    if (!cells.is_markov()) {
        // box covers: uniform grid with about 3^depth bins against Lebesgue
        const int per_axis = static_cast<int>(std::lround(std::pow(3.0, static_cast<double>(depth) / bd)));
        std::int64_t bins = 1;
        for (int i = 0; i < bd; ++i) bins *= per_axis;
        std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const Vec b = mu.base_point(chart, i);
            std::int64_t idx = 0;
            for (int k = bd - 1; k >= 0; --k)
                idx = idx * per_axis +
                      std::clamp(static_cast<int>(std::floor(wrap01(b[k]) * per_axis)), 0, per_axis - 1);
            h[static_cast<std::size_t>(idx)] += mu.weights[i];
            total += mu.weights[i];
        }
        double d = 0.0;
        for (double v : h) d += std::abs(v / total - 1.0 / static_cast<double>(bins));
        return d;
    }

    // Markov cells: forward cylinders of the factor against its Parry measure, which is the
    // reference measure of a linear factor (Lebesgue on tori, uniform on the circle).
    const Mat A = cells.transition().cast<double>();
    const int m = static_cast<int>(A.rows());
    Eigen::EigenSolver<Mat> er(A), el(A.transpose());
    auto perron = [](const Eigen::EigenSolver<Mat>& es) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i].real() > es.eigenvalues()[best].real()) best = i;
        Vec v = es.eigenvectors().col(best).real();
        if (v.sum() < 0) v = -v;
        return std::pair<double, Vec>(es.eigenvalues()[best].real(), v);
    };
    const auto [lambda, r] = perron(er);
    const Vec l = perron(el).second;
    const Vec p0 = (l.array() * r.array()).matrix() / l.dot(r);

    const auto words = parallel_words(mu.size(), depth, m, [&](std::size_t i) { return mu.base_point(chart, i); },
                                      [&](const Vec& b) { return cells.locate(b); },
                                      [&](const Vec& b) { return base_image(chart, b); });
    std::map<std::int64_t, double> h;
    double total = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        h[words[i]] += mu.weights[i];
        total += mu.weights[i];
    }
    auto parry = [&](std::int64_t w) {
        std::vector<int> sym(static_cast<std::size_t>(depth));
        for (int d = depth - 1; d >= 0; --d, w /= m) sym[static_cast<std::size_t>(d)] = static_cast<int>(w % m);
        double mass = p0[sym[0]];
        for (int d = 0; d + 1 < depth; ++d) {
            const int a = sym[static_cast<std::size_t>(d)], b = sym[static_cast<std::size_t>(d) + 1];
            mass *= A(a, b) * r[b] / (lambda * r[a]);
        }
        return mass;
    };
    // L1 = sum over visited words of |h - p| plus the reference mass of the unvisited ones
    double d = 0.0, visited = 0.0;
    for (const auto& [w, v] : h) {
        const double p = parry(w);
        d += std::abs(v / total - p);
        visited += p;
    }
    return d + std::max(0.0, 1.0 - visited);
}

bool in_basin_target(const SystemModel& model, const BasinTarget& target, const Vec& x) {
    const Mat finv = model.frame.inverse();
    for (const auto& p : target.orbit) {
        const Vec c = finv * model.displacement(p, x);
        if (c.head(model.uu_dim).norm() < target.u_radius && c.tail(model.cs_dim).norm() < target.cs_radius)
            return true;
    }
    return false;
}

int first_target(const SystemModel& model, const std::vector<BasinTarget>& targets, Vec x, int horizon) {
    const Mat finv = model.frame.inverse();
    for (int step = 0; step <= horizon; ++step) {
        for (std::size_t k = 0; k < targets.size(); ++k) {
            for (const auto& p : targets[k].orbit) {
                const Vec c = finv * model.displacement(p, x);
                if (c.head(model.uu_dim).norm() < targets[k].u_radius &&
                    c.tail(model.cs_dim).norm() < targets[k].cs_radius)
                    return static_cast<int>(k);
            }
        }
        if (step < horizon) x = model.map(x);
    }
    return -1;
}

const char* status_name(GibbsStatus s) {
    switch (s) {
        case GibbsStatus::Single: return "SINGLE";
        case GibbsStatus::Multi: return "MULTI";
        case GibbsStatus::Unresolved: return "UNRESOLVED";
    }
    return "UNKNOWN";
}

std::vector<int> box_shape(const SystemModel& model, int depth) {
    std::vector<int> shape(static_cast<std::size_t>(model.state_dim), 1 << (depth / 2));
    shape[0] = 1 << depth;
    return shape;
}

std::int64_t box_index(const SystemModel& model, const std::vector<int>& shape, const Vec& x) {
    std::int64_t idx = 0;
    for (int k = model.state_dim - 1; k >= 0; --k) {
        const double v = model.periodic[static_cast<std::size_t>(k)] ? wrap01(x[k]) : 0.5 * (x[k] + 1.0);
        const int n = shape[static_cast<std::size_t>(k)];
        idx = idx * n + std::clamp(static_cast<int>(std::floor(v * n)), 0, n - 1);
    }
    return idx;
}

std::vector<std::int64_t> occupied_boxes(const SystemModel& model, const ParticleMeasure& mu, int depth,
                                         int min_count) {
    const auto shape = box_shape(model, depth);
    std::vector<std::int64_t> idx(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) idx[i] = box_index(model, shape, mu.points.col(static_cast<Eigen::Index>(i)));
    std::sort(idx.begin(), idx.end());
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && idx[j] == idx[i]) ++j;
        if (static_cast<int>(j - i) >= min_count) out.push_back(idx[i]);
        i = j;
    }
    return out;
}

namespace {

// Gap between two boxes over the non-base axes (skew) or all axes with wrap (torus).
double box_gap(const SystemModel& model, const std::vector<int>& shape, std::int64_t a, std::int64_t b) {
    double s = 0.0;
    for (int k = 0; k < model.state_dim; ++k) {
        const int n = shape[static_cast<std::size_t>(k)];
        const int ia = static_cast<int>(a % n), ib = static_cast<int>(b % n);
        a /= n;
        b /= n;
        const bool periodic = model.periodic[static_cast<std::size_t>(k)];
        if (periodic && model.domain == DomainKind::SolidTorus) continue;
        int diff = std::abs(ia - ib);
        if (periodic) diff = std::min(diff, n - diff);
        const double width = periodic ? 1.0 / n : 2.0 / n;
        const double gap = std::max(0, diff - 1) * width;
        s += gap * gap;
    }
    return std::sqrt(s);
}

}  // namespace

GibbsReport ergodic_components(const FactorChart& chart, const ParticleMeasure& mu,
                               const std::vector<BasinTarget>& targets, const ComponentOptions& opt,
                               const ParticleMeasure* second_seed) {
    const SystemModel& m = *chart.model;
    GibbsReport rep;
    if (targets.empty()) {
        rep.components.push_back(mu);
        rep.component_target.push_back(-1);
        rep.component_mass.push_back(1.0);
        rep.status = GibbsStatus::Unresolved;
        if (second_seed) {
            const int d = feasible_depth(chart, mu, *second_seed, opt.distance_depth);
            if (d > 0) {
                const double dist = weak_distance(chart, mu, *second_seed, d);
                rep.distances = {{0.0, dist}, {dist, 0.0}};
                rep.distance_depth = d;
                if (dist < 0.05) rep.status = GibbsStatus::Single;
            }
        }
        rep.support_boxes.push_back(occupied_boxes(m, mu, opt.box_depth, opt.min_box_count));
        return rep;
    }

    const std::vector<std::size_t> sample = spread_subsample(mu.size(), opt.max_labelled);
    std::vector<int> lab(sample.size(), -1);
    parallel_for(sample.size(), [&](std::size_t k) {
        lab[k] = first_target(m, targets, mu.points.col(static_cast<Eigen::Index>(sample[k])), opt.horizon);
    });

    double total = 0.0, unresolved = 0.0;
    std::vector<std::vector<std::size_t>> members(targets.size());
    std::vector<double> mass(targets.size(), 0.0);
    for (std::size_t k = 0; k < sample.size(); ++k) {
        const double w = mu.weights[sample[k]];
        total += w;
        if (lab[k] < 0) {
            unresolved += w;
        } else {
            members[static_cast<std::size_t>(lab[k])].push_back(sample[k]);
            mass[static_cast<std::size_t>(lab[k])] += w;
        }
    }
    rep.unresolved_fraction = unresolved / total;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (members[t].empty()) continue;
        ParticleMeasure c = mu.subset(members[t]);
        for (auto& l : c.label) l = static_cast<int>(t);
        rep.components.push_back(std::move(c));
        rep.component_target.push_back(static_cast<int>(t));
        rep.component_mass.push_back(mass[t] / total);
    }
    if (rep.unresolved_fraction > 0.05)
        rep.status = GibbsStatus::Unresolved;
    else
        rep.status = rep.components.size() > 1 ? GibbsStatus::Multi : GibbsStatus::Single;

    const auto shape = box_shape(m, opt.box_depth);
    for (const auto& c : rep.components) rep.support_boxes.push_back(occupied_boxes(m, c, opt.box_depth, opt.min_box_count));
    const std::size_t nc = rep.components.size();
    rep.distances.assign(nc, std::vector<double>(nc, 0.0));
    if (nc > 1) {
        int d = opt.distance_depth;
        for (std::size_t i = 0; i < nc; ++i)
            for (std::size_t j = i + 1; j < nc; ++j) d = std::min(d, feasible_depth(chart, rep.components[i], rep.components[j], d));
        rep.distance_depth = d;
        for (std::size_t i = 0; i < nc; ++i) {
            for (std::size_t j = i + 1; j < nc; ++j) {
                const double dist = d > 0 ? weak_distance(chart, rep.components[i], rep.components[j], d)
                                          : std::numeric_limits<double>::quiet_NaN();
                rep.distances[i][j] = rep.distances[j][i] = dist;
                for (auto a : rep.support_boxes[i])
                    for (auto b : rep.support_boxes[j]) rep.box_margin = std::min(rep.box_margin, box_gap(m, shape, a, b));
            }
        }
    }
    return rep;
}

void write_measure_csv(const ParticleMeasure& mu, const std::string& path) {
    std::ofstream os(path);
    os << std::setprecision(17);
    for (int i = 0; i < mu.dim; ++i) os << "x" << i << ",";
    os << "weight,cell,label\n";
    for (std::size_t k = 0; k < mu.size(); ++k) {
        for (int i = 0; i < mu.dim; ++i) os << mu.points(i, static_cast<Eigen::Index>(k)) << ",";
        os << mu.weights[k] << "," << mu.cell(k) << "," << mu.label[k] << "\n";
    }
}

nlohmann::json report_json(const GibbsReport& r) {
    nlohmann::json j;
    j["status"] = status_name(r.status);
    j["components"] = r.components.size();
    j["component_mass"] = r.component_mass;
    j["component_target"] = r.component_target;
    j["unresolved_fraction"] = r.unresolved_fraction;
    j["distances"] = r.distances;
    j["distance_depth"] = r.distance_depth;
    std::vector<std::size_t> nboxes;
    for (const auto& b : r.support_boxes) nboxes.push_back(b.size());
    j["support_box_counts"] = nboxes;
    j["box_margin"] = std::isfinite(r.box_margin) ? nlohmann::json(r.box_margin) : nlohmann::json(nullptr);
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& c : r.convergence_curve)
        curve.push_back({{"n", c.n}, {"distance", std::isnan(c.distance) ? nlohmann::json(nullptr) : nlohmann::json(c.distance)}});
    j["convergence_curve"] = curve;
    return j;
}

}  // namespace ugibbs
