#include "ugibbs/entropy.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>

namespace ugibbs {

namespace {

// Lifted one-step map with the linear part cached.
std::function<Vec(const Vec&)> lifted_stepper(const SystemModel& model) {
    if (model.skew) return [&model](const Vec& p) { return lifted_map(model, p); };
    const Mat A = model.linear->real_matrix();
    return [&model, A](const Vec& p) {
        const Vec w = model.wrap(p);
        Vec g = model.map(w) - A * w;
        for (int i = 0; i < g.size(); ++i) g[i] = wrap_half(g[i]);
        return Vec(A * p + g);
    };
}

// Lengths of f^n(D), n = 0..n_max, from polylines refined after every step until no image
// segment is longer than delta. Inserted points are pushed from the seed disk, so every vertex
// is an exact image.
std::vector<double> polyline_lengths(const UnstablePlaque& disk, const std::function<Vec(const Vec&)>& step,
                                     int n_max, double delta, std::size_t max_points) {
    struct Vertex {
        double s;
        Vec x;
    };
    auto image = [&](double s, int n) {
        Vec x = disk.at_sigma(s);
        for (int i = 0; i < n; ++i) x = step(x);
        return x;
    };
    const double s0 = disk.sigma.front(), s1 = disk.sigma.back();
    std::vector<Vertex> cur;
    for (int i = 0; i <= 16; ++i) {
        const double s = s0 + (s1 - s0) * i / 16.0;
        cur.push_back({s, disk.at_sigma(s)});
    }
    std::vector<double> lengths;
    for (int n = 0; n <= n_max; ++n) {
        if (n > 0)
            for (auto& v : cur) v.x = step(v.x);
        std::vector<Vertex> next{cur.front()};
        for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
            // subdivide [cur[i], cur[i+1]] depth-first, emitting vertices in order
            std::vector<Vertex> stack{cur[i + 1]};
            Vertex left = cur[i];
            while (!stack.empty()) {
                const Vertex& right = stack.back();
                if ((right.x - left.x).norm() > delta && right.s - left.s > 1e-15 * (s1 - s0)) {
                    const double sm = 0.5 * (left.s + right.s);
                    stack.push_back({sm, image(sm, n)});
                } else {
                    left = right;
                    next.push_back(right);
                    stack.pop_back();
                }
            }
            if (next.size() > max_points) throw Error(ErrorCode::ResolutionExhausted, "polyline exceeds the point budget");
        }
        cur.swap(next);
        double len = 0.0;
        for (std::size_t i = 0; i + 1 < cur.size(); ++i) len += (cur[i + 1].x - cur[i].x).norm();
        lengths.push_back(len);
    }
    return lengths;
}

}  // namespace

VolumeGrowth topological_u_entropy(const FactorChart& chart, const UnstablePlaque& disk, int n_max,
                                   std::size_t max_points) {
    if (n_max < 8) throw Error(ErrorCode::ResolutionExhausted, "n_max < 8 leaves too few iterates to regress");
    if (disk.size() < 2) throw Error(ErrorCode::InvalidParameter, "seed disk has no extent");
    const auto step = lifted_stepper(*chart.model);
    std::vector<double> prev;
    for (double delta = 0.2; delta > 1e-4; delta /= 2) {
        std::vector<double> cur = polyline_lengths(disk, step, n_max, delta, max_points);
        bool stable = !prev.empty();
        for (std::size_t n = 0; stable && n < cur.size(); ++n)
            stable = std::abs(cur[n] - prev[n]) < 0.005 * cur[n];
        if (stable) {
            VolumeGrowth g;
            g.delta = delta;
            for (double l : cur) g.log_length.push_back(std::log(l));
            const int window = (n_max + 1) / 2;
            std::vector<double> xs, ys;
            for (int n = n_max - window + 1; n <= n_max; ++n) {
                xs.push_back(n);
                ys.push_back(g.log_length[static_cast<std::size_t>(n)]);
            }
            const LinearFit fit = fit_line(xs, ys);
            g.h_vol = fit.slope;
            g.stderr_ = fit.slope_stderr;
            return g;
        }
        prev = std::move(cur);
    }
    throw Error(ErrorCode::ResolutionExhausted, "polyline lengths did not settle");
}

ConditionalEntropy metric_u_entropy(const FactorChart& chart, const ParticleMeasure& mu, int min_particles) {
    std::vector<std::vector<std::size_t>> members(mu.groups.size());
    for (std::size_t i = 0; i < mu.size(); ++i) members[static_cast<std::size_t>(mu.group[i])].push_back(i);
    const double lambda = chart.expansion;

    std::vector<double> h(mu.groups.size(), 0.0), w(mu.groups.size(), 0.0);
    std::vector<char> used(mu.groups.size(), 0);
    parallel_for(mu.groups.size(), [&](std::size_t g) {
        const auto& idx = members[g];
        if (idx.empty()) return;
        const PlaqueGroup& grp = mu.groups[g];
        double wg = 0.0;
        for (std::size_t i : idx) wg += mu.weights[i];
        if (grp.length() <= 0.0) {
            // atomic conditional: the branch holds all of it
            used[g] = 1;
            w[g] = wg;
            return;
        }
        if (static_cast<int>(idx.size()) < min_particles) return;
        const auto pieces =
            split_line(chart, base_image(chart, grp.base_anchor), lambda * grp.t_lo, lambda * grp.t_hi);
        std::vector<double> mass(pieces.size(), 0.0);
        std::vector<int> count(pieces.size(), 0);
        for (std::size_t i : idx) {
            const double s = lambda * mu.param[i];
            std::size_t k = 0;
            while (k + 1 < pieces.size() && s >= pieces[k].b) ++k;
            mass[k] += mu.weights[i];
            ++count[k];
        }
        for (int c : count)
            if (c > 0 && c < 5) return;
        double hg = 0.0;
        for (double m : mass)
            if (m > 0.0) hg -= (m / wg) * std::log(m / wg);
        used[g] = 1;
        h[g] = hg;
        w[g] = wg;
    });

    ConditionalEntropy out;
    std::vector<std::size_t> ok;
    for (std::size_t g = 0; g < mu.groups.size(); ++g) {
        if (used[g])
            ok.push_back(g);
        else if (!members[g].empty())
            ++out.groups_skipped;
    }
    if (ok.empty()) throw Error(ErrorCode::InsufficientConditionals, "no plaque passes the particle floors");
    out.groups_used = ok.size();
    double num = 0.0, den = 0.0;
    for (std::size_t g : ok) {
        num += w[g] * h[g];
        den += w[g];
    }
    out.h_cond = num / den;
    const std::size_t batches = std::min<std::size_t>(10, ok.size());
    if (batches > 1) {
        std::vector<double> bm;
        for (std::size_t b = 0; b < batches; ++b) {
            double n = 0.0, d = 0.0;
            for (std::size_t k = b * ok.size() / batches; k < (b + 1) * ok.size() / batches; ++k) {
                n += w[ok[k]] * h[ok[k]];
                d += w[ok[k]];
            }
            bm.push_back(n / d);
        }
        const double mean = std::accumulate(bm.begin(), bm.end(), 0.0) / static_cast<double>(batches);
        double var = 0.0;
        for (double v : bm) var += (v - mean) * (v - mean);
        var /= static_cast<double>(batches - 1);
        out.stderr_ = std::sqrt(var / static_cast<double>(batches));
    }
    return out;
}

SymbolicEntropy symbolic_entropy(const FactorChart& chart, const ParticleMeasure& mu, int max_depth) {
    if (max_depth < 2) throw Error(ErrorCode::InvalidParameter, "depth must be at least 2");
    // exact atomic measures carry no sampling error
    bool exact = true;
    for (const auto& g : mu.groups) exact = exact && g.length() <= 0.0;
    const std::int64_t base = chart.coarse_count();
    std::vector<std::int64_t> words = cylinder_words(chart, mu, max_depth);
    auto entropy = [&](const std::vector<std::pair<std::int64_t, double>>& hist) {
        double h = 0.0;
        for (const auto& e : hist)
            if (e.second > 0.0) h -= e.second * std::log(e.second);
        return h;
    };
    for (int d = max_depth; d >= 2; --d) {
        const auto hn = word_histogram(words, mu.weights);
        std::vector<std::int64_t> shorter(words.size());
        for (std::size_t i = 0; i < words.size(); ++i) shorter[i] = words[i] / base;
        if (exact || passes_floor(mu.size(), hn.size())) {
            const auto hm = word_histogram(shorter, mu.weights);
            return {std::max(0.0, entropy(hn) - entropy(hm)), d};
        }
        words.swap(shorter);
    }
    throw Error(ErrorCode::DepthTooLarge, "no depth >= 2 passes the particle floor");
}

const char* entropy_status_name(EntropyStatus s) {
    switch (s) {
        case EntropyStatus::Equality: return "EQUALITY";
        case EntropyStatus::Strict: return "STRICT";
        case EntropyStatus::Violation: return "VIOLATION";
        case EntropyStatus::Unavailable: return "UNAVAILABLE";
    }
    return "?";
}

EntropyReport entropy_identities(const FactorChart& chart, const std::vector<BatteryEntry>& battery) {
    EntropyReport rep;
    rep.h_base = chart.base_entropy();
    rep.h_base_pf = chart.cells->is_markov() ? std::log(chart.cells->pf_eigenvalue()) : rep.h_base;
    for (const auto& e : battery) {
        EntropyRow row;
        row.name = e.name;
        try {
            row.cond = metric_u_entropy(chart, e.measure);
        } catch (const Error& err) {
            // no estimate is not evidence against the inequality
            row.error = err.what();
            row.status = EntropyStatus::Unavailable;
            rep.rows.push_back(row);
            ++rep.unavailable;
            continue;
        }
        const double hc = row.cond.h_cond;
        if (hc > rep.h_base + 3.0 * row.cond.stderr_ + 1e-12) {
            row.status = EntropyStatus::Violation;
            ++rep.violations;
        } else if (hc < rep.h_base - 0.03 * rep.h_base) {
            row.status = EntropyStatus::Strict;
        } else {
            row.status = EntropyStatus::Equality;
        }
        if (e.certified) {
            row.symbolic_checked = true;
            row.symbolic = symbolic_entropy(chart, e.measure);
            row.symbolic_agrees = std::abs(row.symbolic.h - hc) <= 0.05 * hc + 1e-9;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

nlohmann::json entropy_json(const EntropyReport& r) {
    nlohmann::json j;
    j["h_base"] = r.h_base;
    j["h_base_pf"] = r.h_base_pf;
    j["violations"] = r.violations;
    j["unavailable"] = r.unavailable;
    j["measures"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json e{{"name", row.name},
                         {"h_cond", row.cond.h_cond},
                         {"stderr", row.cond.stderr_},
                         {"groups_used", row.cond.groups_used},
                         {"groups_skipped", row.cond.groups_skipped},
                         {"status", entropy_status_name(row.status)}};
        if (row.symbolic_checked) {
            e["h_total_symbolic"] = row.symbolic.h;
            e["symbolic_depth"] = row.symbolic.depth;
            e["symbolic_agrees"] = row.symbolic_agrees;
        }
        if (!row.error.empty()) e["error"] = row.error;
        j["measures"].push_back(e);
    }
    return j;
}

void write_entropy_csv(const EntropyReport& r, const std::string& path) {
    std::ofstream os(path);
    os << std::setprecision(17) << "name,h_cond,stderr,h_base,status,h_total_symbolic,symbolic_depth\n";
    for (const auto& row : r.rows) {
        os << row.name << ',' << row.cond.h_cond << ',' << row.cond.stderr_ << ',' << r.h_base << ','
           << entropy_status_name(row.status) << ',';
        if (row.symbolic_checked) os << row.symbolic.h << ',' << row.symbolic.depth;
        else os << ',';
        os << '\n';
    }
}

void write_growth_csv(const VolumeGrowth& g, const std::string& path) {
    std::ofstream os(path);
    os << std::setprecision(17) << "n,log_length\n";
    for (std::size_t n = 0; n < g.log_length.size(); ++n) os << n << ',' << g.log_length[n] << '\n';
}

}  // namespace ugibbs
