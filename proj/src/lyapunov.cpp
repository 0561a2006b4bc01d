#include "ugibbs/lyapunov.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <numeric>

namespace ugibbs {

namespace {

constexpr int kBlocks = 10;
constexpr double kT975_9 = 2.2621571627409915;  // Student t, 9 degrees of freedom

void check_domain(const SystemModel& model, const Vec& x) {
    if (model.domain_margin(x) < -1e-12) throw Error(ErrorCode::DomainEscape, "orbit left the domain");
}

Mat orthonormalize(const Mat& m) {
    Eigen::HouseholderQR<Mat> qr(m);
    return qr.householderQ() * Mat::Identity(m.rows(), m.cols());
}

double top_singular(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()[0];
}

// Sequential Benettin over a list of starting points, steps_each per orbit, with 10 batch means
// over the concatenated stream.
LyapunovReport benettin(const SystemModel& model, const std::vector<Vec>& starts, long steps_each, int warm_up) {
    if (steps_each < 10000) throw Error(ErrorCode::InvalidParameter, "need at least 1e4 steps");
    const int d = model.state_dim;
    const long total = steps_each * static_cast<long>(starts.size());
    Mat block_sum = Mat::Zero(d, kBlocks);
    Vec block_len = Vec::Zero(kBlocks);
    double log_det = 0.0;
    long k = 0;
    for (const Vec& x0 : starts) {
        Vec x = x0;
        Mat q = Mat::Identity(d, d);
        // align the frame first so the exponents carry no O(1/n) transient
        for (int i = 0; i < warm_up; ++i) {
            check_domain(model, x);
            q = Eigen::HouseholderQR<Mat>(model.derivative(x) * q).householderQ();
            x = model.map(x);
        }
        for (long i = 0; i < steps_each; ++i, ++k) {
            check_domain(model, x);
            const Mat df = model.derivative(x);
            log_det += std::log(std::abs(df.determinant()));
            Eigen::HouseholderQR<Mat> qr(df * q);
            const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
            q = qr.householderQ();
            const int b = static_cast<int>(k * kBlocks / total);
            for (int j = 0; j < d; ++j) {
                const double rj = std::abs(r(j, j));
                if (!(rj > 1e-300) || !std::isfinite(rj)) throw Error(ErrorCode::DegenerateFrame, "QR breakdown");
                block_sum(j, b) += std::log(rj);
            }
            block_len[b] += 1.0;
            x = model.map(x);
        }
    }
    Mat rates = block_sum.array().rowwise() / block_len.transpose().array();
    Vec mean = block_sum.rowwise().sum() / static_cast<double>(total);
    Vec hw(d);
    for (int j = 0; j < d; ++j) {
        const double mb = rates.row(j).mean();
        const double var = (rates.row(j).array() - mb).square().sum() / (kBlocks - 1);
        hw[j] = kT975_9 * std::sqrt(var / kBlocks);
    }
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean[a] > mean[b]; });

    LyapunovReport rep;
    rep.spectrum.resize(d);
    rep.half_width.resize(d);
    for (int j = 0; j < d; ++j) {
        rep.spectrum[j] = mean[order[static_cast<std::size_t>(j)]];
        rep.half_width[j] = hw[order[static_cast<std::size_t>(j)]];
    }
    rep.cs_top = rep.spectrum[model.uu_dim];
    rep.cs_top_half_width = rep.half_width[model.uu_dim];
    rep.domination_gap = rep.spectrum[model.uu_dim - 1] - rep.cs_top;
    rep.log_det_average = log_det / static_cast<double>(total);
    rep.steps = total;
    return rep;
}

}  // namespace

LyapunovReport lyapunov_spectrum(const SystemModel& model, const Vec& x, long n_steps, int burn_in) {
    return benettin(model, {x}, n_steps, burn_in);
}

LyapunovReport lyapunov_spectrum(const SystemModel& model, const ParticleMeasure& mu, long n_steps,
                                 std::uint64_t seed, int orbits) {
    if (mu.size() == 0 || orbits < 1) throw Error(ErrorCode::InvalidParameter, "empty measure or no orbits");
    Rng rng(seed);
    const double total = mu.total_weight();
    std::vector<Vec> starts;
    for (int o = 0; o < orbits; ++o) {
        double r = rng.uniform() * total, acc = 0.0;
        std::size_t pick = mu.size() - 1;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            acc += mu.weights[i];
            if (r < acc) {
                pick = i;
                break;
            }
        }
        starts.push_back(mu.points.col(static_cast<Eigen::Index>(pick)));
    }
    return benettin(model, starts, n_steps, 100);
}

double subspace_distance(const Mat& q1, const Mat& q2) {
    const Mat diff = q1 * q1.transpose() - q2 * q2.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(diff, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<Mat> cs_bundle(const SystemModel& model, const Vec& x, int n, double tol) {
    const int cs = model.cs_dim;
    const Mat e0 = model.frame.rightCols(cs);
    // second start tilted towards the uu directions
    Mat e1 = e0;
    for (int j = 0; j < cs; ++j) e1.col(j) += 0.5 * model.frame.col(j % model.uu_dim);

    std::vector<Vec> orbit{x};
    std::vector<Eigen::PartialPivLU<Mat>> inv;
    for (int extra = 32; extra <= 4096; extra *= 2) {
        while (static_cast<int>(orbit.size()) < n + extra + 1) orbit.push_back(model.map(orbit.back()));
        while (inv.size() + 1 < orbit.size()) inv.emplace_back(model.derivative(orbit[inv.size()]));
        std::vector<Mat> out(static_cast<std::size_t>(n) + 1);
        Mat a = orthonormalize(e0), b = orthonormalize(e1);
        for (int i = n + extra - 1; i >= 0; --i) {
            a = orthonormalize(inv[static_cast<std::size_t>(i)].solve(a));
            b = orthonormalize(inv[static_cast<std::size_t>(i)].solve(b));
            if (i <= n) out[static_cast<std::size_t>(i)] = a;
            if (i == n && subspace_distance(a, b) > tol) break;
            if (i == 0) return out;
        }
    }
    throw Error(ErrorCode::NoConvergence, "cs bundle did not converge");
}

namespace {

double log_norm_from(const SystemModel& model, Vec x, const Mat& e, int m) {
    Mat v = e;
    double log_scale = 0.0;
    for (int i = 0; i < m; ++i) {
        v = model.derivative(x) * v;
        const double s = v.norm();
        v /= s;
        log_scale += std::log(s);
        x = model.map(x);
    }
    return log_scale + std::log(top_singular(v));
}

}  // namespace

double log_cs_norm(const SystemModel& model, const Vec& x, int m) {
    if (m < 1) throw Error(ErrorCode::InvalidParameter, "m must be positive");
    return log_norm_from(model, x, cs_bundle(model, x, 0).front(), m);
}

double cs_average(const SystemModel& model, const ParticleMeasure& mu, int m, std::size_t max_particles) {
    if (mu.size() == 0) throw Error(ErrorCode::InvalidParameter, "empty measure");
    const std::vector<std::size_t> idx = spread_subsample(mu.size(), max_particles);
    std::vector<double> val(idx.size());
    parallel_for(idx.size(), [&](std::size_t k) {
        val[k] = log_cs_norm(model, mu.points.col(static_cast<Eigen::Index>(idx[k])), m) / m;
    });
    double s = 0.0, w = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        s += mu.weights[idx[k]] * val[k];
        w += mu.weights[idx[k]];
    }
    return s / w;
}

CertificateResult c_mostly_certificate(const SystemModel& model, const std::vector<ParticleMeasure>& states,
                                       const std::vector<int>& m_grid, std::size_t max_particles) {
    if (states.empty()) throw Error(ErrorCode::InvalidParameter, "need at least one Gibbs state");
    std::vector<int> grid = m_grid;
    std::sort(grid.begin(), grid.end());
    CertificateResult res;
    for (int m : grid) {
        std::vector<double> avg;
        for (const auto& mu : states) avg.push_back(cs_average(model, mu, m, max_particles));
        const auto worst = std::max_element(avg.begin(), avg.end());
        if (*worst < 0.0) {
            CsCertificate c;
            c.m = m;
            c.a = 0.5 * *worst;
            c.margin = c.a - *worst;
            c.averages = avg;
            res.certificate = c;
            return res;
        }
        res.failing_state = static_cast<int>(worst - avg.begin());
        res.failing_value = *worst;
    }
    return res;
}

HyperbolicTimes hyperbolic_times(const SystemModel& model, const Vec& x, long blocks, double a, int block_size,
                                 double eps) {
    if (block_size < 1) throw Error(ErrorCode::InvalidParameter, "block size must be positive");
    if (blocks < 1000) throw Error(ErrorCode::InvalidParameter, "need at least 1000 blocks");
    const int n = static_cast<int>(blocks * block_size);
    const auto bundle = cs_bundle(model, x, n);
    std::vector<double> ell(static_cast<std::size_t>(blocks));
    Vec y = x;
    for (long i = 0; i < blocks; ++i) {
        ell[static_cast<std::size_t>(i)] =
            log_norm_from(model, y, bundle[static_cast<std::size_t>(i * block_size)], block_size);
        y = model.iterate(y, block_size);
    }

    HyperbolicTimes out;
    const double target = a * block_size;
    double prefix = 0.0, running_min = 0.0;
    for (long i = 0; i < blocks; ++i) {
        prefix += ell[static_cast<std::size_t>(i)] - target;
        if (prefix < running_min) out.times.push_back(i + 1);
        running_min = std::min(running_min, prefix);
    }
    out.density = static_cast<double>(out.times.size()) / static_cast<double>(blocks);
    const double c1 = std::accumulate(ell.begin(), ell.end(), 0.0) / static_cast<double>(blocks);
    const double top = *std::max_element(ell.begin(), ell.end());
    out.average = c1 / block_size;
    if (top < target)
        out.pliss_bound = 1.0;
    else if (c1 < target)
        out.pliss_bound = (target - c1) / (top - c1);
    out.stable_size_bound = a < 0 ? eps / (1.0 - std::exp(target / 2.0)) : std::numeric_limits<double>::infinity();
    return out;
}

nlohmann::json lyapunov_json(const LyapunovReport& r) {
    nlohmann::json j;
    j["spectrum"] = std::vector<double>(r.spectrum.data(), r.spectrum.data() + r.spectrum.size());
    j["half_width"] = std::vector<double>(r.half_width.data(), r.half_width.data() + r.half_width.size());
    j["cs_top"] = r.cs_top;
    j["cs_top_half_width"] = r.cs_top_half_width;
    j["domination_gap"] = r.domination_gap;
    j["log_det_average"] = r.log_det_average;
    j["steps"] = r.steps;
    if (r.certificate) {
        j["certificate"] = {{"m", r.certificate->m},
                            {"a", r.certificate->a},
                            {"margin", r.certificate->margin},
                            {"averages", r.certificate->averages}};
    } else {
        j["certificate"] = nullptr;
    }
    if (std::isfinite(r.hyperbolic_time_fraction)) j["hyperbolic_time_fraction"] = r.hyperbolic_time_fraction;
    if (std::isfinite(r.stable_size_bound)) j["stable_size_bound"] = r.stable_size_bound;
    return j;
}

}  // namespace ugibbs
