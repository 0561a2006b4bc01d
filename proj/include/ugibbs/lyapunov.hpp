#pragma once

#include "ugibbs/measures.hpp"

#include <optional>

namespace ugibbs {

struct CsCertificate {
    int m = 0;
    double a = 0.0;       // half the worst state average
    double margin = 0.0;  // a - worst average
    std::vector<double> averages;  // per state, at m
};

struct LyapunovReport {
    Vec spectrum;    // descending, nats per iteration
    Vec half_width;  // 95% batch-means half-widths (10 blocks)
    double cs_top = 0.0;
    double cs_top_half_width = 0.0;
    double domination_gap = 0.0;  // lowest uu exponent minus cs_top
    double log_det_average = 0.0;
    long steps = 0;
    std::optional<CsCertificate> certificate;
    double hyperbolic_time_fraction = std::numeric_limits<double>::quiet_NaN();
    double stable_size_bound = std::numeric_limits<double>::quiet_NaN();
};

// Benettin QR along the orbit of x; the first `burn_in` steps only align the frame.
LyapunovReport lyapunov_spectrum(const SystemModel& model, const Vec& x, long n_steps, int burn_in = 100);
// Average over `orbits` orbits started at particles of mu drawn with `seed`; n_steps per orbit.
LyapunovReport lyapunov_spectrum(const SystemModel& model, const ParticleMeasure& mu, long n_steps,
                                 std::uint64_t seed, int orbits = 4);

// Orthonormal bases of E^cs along x_0..x_{n}: the inverse cocycle is iterated backwards from
// extra points past the end until two different starting subspaces agree to `tol`.
std::vector<Mat> cs_bundle(const SystemModel& model, const Vec& x, int n, double tol = 1e-8);
double subspace_distance(const Mat& q1, const Mat& q2);

// log || Df^m | E^cs(x) ||.
double log_cs_norm(const SystemModel& model, const Vec& x, int m);
// mu-average of (1/m) log || Df^m | E^cs || over at most `max_particles` particles.
double cs_average(const SystemModel& model, const ParticleMeasure& mu, int m, std::size_t max_particles = 2000);

struct CertificateResult {
    std::optional<CsCertificate> certificate;
    int failing_state = -1;  // set on FAIL: worst state at the largest m
    double failing_value = 0.0;
};

CertificateResult c_mostly_certificate(const SystemModel& model, const std::vector<ParticleMeasure>& states,
                                       const std::vector<int>& m_grid = {1, 2, 4, 8},
                                       std::size_t max_particles = 2000);

struct HyperbolicTimes {
    std::vector<long> times;  // block counts n
    double density = 0.0;
    double average = 0.0;      // mean per-block log norm over N_s
    double pliss_bound = 0.0;  // Pliss lower bound on the density (0 if the average is not below a)
    double stable_size_bound = 0.0;
};

// Times n (in blocks of N_s iterates) with prod_{i=j}^{n-1} ||Df^{N_s}|E^cs(f^{i N_s} x)|| < e^{a (n-j) N_s}
// for every j < n. Needs at least 1000 blocks.
HyperbolicTimes hyperbolic_times(const SystemModel& model, const Vec& x, long blocks, double a, int block_size,
                                 double eps = 0.05);

nlohmann::json lyapunov_json(const LyapunovReport& r);

}  // namespace ugibbs
